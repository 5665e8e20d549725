//! Data-parallel mapping with a sequential fallback.
//!
//! With the `parallel` feature, [`Exec::Parallel`] runs on rayon. Without it
//! both variants run sequentially. Output order always matches input order.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    #[default]
    Parallel,
    Sequential,
}

impl Exec {
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
            _ => items.iter().map(f).collect(),
        }
    }

    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }
}

/// Run `f` inside a rayon pool capped at `threads` workers.
/// Without the `parallel` feature the cap is ignored.
pub fn with_thread_cap<R: Send, F: FnOnce() -> R + Send>(threads: Option<usize>, f: F) -> R {
    #[cfg(feature = "parallel")]
    if let Some(k) = threads {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build() {
            return pool.install(f);
        }
    }
    let _ = threads;
    f()
}

/// Thread cap from the `SASAKI_MCP_THREADS` environment variable.
pub fn env_thread_cap() -> Option<usize> {
    std::env::var("SASAKI_MCP_THREADS").ok().and_then(|v| v.trim().parse().ok())
}
