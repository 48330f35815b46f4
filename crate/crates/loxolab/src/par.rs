//! Data-parallel fan-out with a sequential fallback.
//!
//! Monte Carlo work is split into indexed chunks; chunk `i` draws from RNG
//! substream `i`, so the result is independent of the execution mode and of
//! the number of threads.

/// How to run a chunked workload.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    /// Rayon work-stealing pool; falls back to sequential when the crate is
    /// built without the `parallel` feature.
    Parallel,
}

impl ExecMode {
    /// Parallel when available, otherwise sequential.
    pub fn auto() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

/// Maps `f` over `0..chunks`, preserving index order in the output.
pub fn map_chunks<T: Send>(
    mode: ExecMode,
    chunks: usize,
    f: impl Fn(usize) -> T + Sync + Send,
) -> Vec<T> {
    match mode {
        ExecMode::Sequential => (0..chunks).map(f).collect(),
        ExecMode::Parallel => {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                (0..chunks).into_par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                (0..chunks).map(f).collect()
            }
        }
    }
}

/// Number of samples handed to one chunk.
pub const CHUNK: u64 = 1024;

/// Splits `samples` draws into `(chunk_index, chunk_len)` pieces.
pub fn chunk_lens(samples: u64) -> Vec<u64> {
    let full = samples / CHUNK;
    let rem = samples % CHUNK;
    let mut lens = vec![CHUNK; full as usize];
    if rem > 0 {
        lens.push(rem);
    }
    lens
}

/// Installs a global rayon pool of `threads` workers. No-op without the
/// `parallel` feature or when the pool was already installed.
pub fn configure_threads(threads: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let serial = map_chunks(ExecMode::Sequential, 17, |i| i * i);
        let parallel = map_chunks(ExecMode::Parallel, 17, |i| i * i);
        assert_eq!(serial, parallel);
    }

    #[test]
    fn chunking_covers_all_samples() {
        assert_eq!(chunk_lens(0).iter().sum::<u64>(), 0);
        assert_eq!(chunk_lens(1024).iter().sum::<u64>(), 1024);
        assert_eq!(chunk_lens(2500).iter().sum::<u64>(), 2500);
    }
}
