//! Wall-clock timing on the monotonic clock.

use std::time::Instant;

/// Runs `job` and returns its output with the elapsed seconds.
pub fn benchmark<T>(job: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = job();
    (out, start.elapsed().as_secs_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noop_is_fast() {
        let ((), s) = benchmark(|| ());
        assert!(s < 0.01);
    }

    #[test]
    fn measures_sleep() {
        let (v, s) = benchmark(|| {
            std::thread::sleep(std::time::Duration::from_millis(20));
            7
        });
        assert_eq!(v, 7);
        assert!(s >= 0.02);
    }
}
