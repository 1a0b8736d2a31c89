use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateLimit {
    pub requests_per_second: f64,
    pub burst: u32,
}

/// A blocking token bucket.
#[derive(Debug)]
pub struct TokenBucket {
    limit: RateLimit,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(limit: RateLimit) -> Self {
        assert!(limit.requests_per_second > 0.0 && limit.burst > 0, "rate limit must be positive");
        Self {
            limit,
            state: Mutex::new((f64::from(limit.burst), Instant::now())),
        }
    }

    pub fn limit(&self) -> RateLimit {
        self.limit
    }

    /// Takes a token, or reports how long to wait before one is available.
    pub fn try_acquire(&self) -> Result<(), Duration> {
        let mut state = self.state.lock().expect("lock");
        let now = Instant::now();
        let refill = now.duration_since(state.1).as_secs_f64() * self.limit.requests_per_second;
        state.0 = (state.0 + refill).min(f64::from(self.limit.burst));
        state.1 = now;
        if state.0 >= 1.0 {
            state.0 -= 1.0;
            Ok(())
        } else {
            Err(Duration::from_secs_f64((1.0 - state.0) / self.limit.requests_per_second))
        }
    }

    /// Blocks until a token is available; returns the time spent waiting.
    pub fn acquire(&self) -> Duration {
        let mut waited = Duration::ZERO;
        while let Err(wait) = self.try_acquire() {
            std::thread::sleep(wait);
            waited += wait;
        }
        waited
    }
}

static PROCESS_BUCKET: OnceLock<Arc<TokenBucket>> = OnceLock::new();

/// The bucket shared by every remote backend in the process. The first
/// caller's limit wins.
pub fn process_bucket(limit: RateLimit) -> Arc<TokenBucket> {
    PROCESS_BUCKET.get_or_init(|| Arc::new(TokenBucket::new(limit))).clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn burst_then_wait() {
        let b = TokenBucket::new(RateLimit { requests_per_second: 1000.0, burst: 2 });
        assert!(b.try_acquire().is_ok());
        assert!(b.try_acquire().is_ok());
        let wait = b.try_acquire().unwrap_err();
        assert!(wait <= Duration::from_millis(1));
        b.acquire();
    }
}
