//! Wall-clock measurement for the speed sweep. Measurements use a monotonic
//! clock, discard one warm-up run, and report the median of the requested
//! trials. Work too fast for the clock is repeated in batches that double
//! until one batch crosses a floor comfortably above the timer resolution.

use std::time::{Duration, Instant};

use super::stats::median;

/// One batch must take at least this long before its reading is trusted;
/// 10 µs is ~10⁴ ticks of a nanosecond-resolution monotonic clock.
const MIN_BATCH: Duration = Duration::from_micros(10);

/// Median seconds per invocation of `work` over `trials` measured batches.
/// The first invocation is a discarded warm-up (cache/allocator effects).
pub fn measure_median_seconds<F: FnMut()>(trials: usize, mut work: F) -> f64 {
    assert!(trials >= 1, "timing needs at least one trial");
    work();
    let mut reps: u32 = 1;
    loop {
        let start = Instant::now();
        for _ in 0..reps {
            work();
        }
        if start.elapsed() >= MIN_BATCH || reps >= 1 << 20 {
            break;
        }
        reps *= 2;
    }
    let samples: Vec<f64> = (0..trials)
        .map(|_| {
            let start = Instant::now();
            for _ in 0..reps {
                work();
            }
            start.elapsed().as_secs_f64() / reps as f64
        })
        .collect();
    median(&samples)
}
