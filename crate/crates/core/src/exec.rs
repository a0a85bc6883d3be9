// SPDX-License-Identifier: MIT OR Apache-2.0

//! Execution policy for the data-parallel kernels.
//!
//! Every kernel in this crate splits its work into a fixed, size-determined
//! set of chunks and computes each chunk independently. The sequential and
//! parallel paths walk the same chunks, so results are bitwise identical
//! regardless of policy or worker count. Without the `parallel` feature,
//! [`Execution::Parallel`] silently runs sequentially.

/// How inner loops are scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this policy actually fans out to worker threads in this build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Evaluate `f(0..len)` and collect results in index order.
    pub fn map<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..len).into_par_iter().map(f).collect();
        }
        (0..len).map(f).collect()
    }

    /// Run `f(chunk_index, chunk)` over consecutive `chunk_len`-sized pieces of `data`.
    pub fn for_each_chunk_mut<T, F>(self, data: &mut [T], chunk_len: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        let chunk_len = chunk_len.max(1);
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            data.par_chunks_mut(chunk_len)
                .enumerate()
                .for_each(|(c, chunk)| f(c, chunk));
            return;
        }
        data.chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(c, chunk)| f(c, chunk));
    }
}

/// Caps the global worker pool at `threads`. Only the first call takes effect.
pub fn set_threads(threads: usize) -> crate::error::Result<()> {
    if threads == 0 {
        return Err(crate::error::Error::argument("thread count must be at least 1"));
    }
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        for exec in [Execution::Sequential, Execution::Parallel] {
            let v = exec.map(1000, |i| i * i);
            assert!(v.iter().enumerate().all(|(i, &x)| x == i * i));
        }
    }

    #[test]
    fn chunks_cover_everything() {
        for exec in [Execution::Sequential, Execution::Parallel] {
            let mut v = vec![0usize; 103];
            exec.for_each_chunk_mut(&mut v, 10, |c, chunk| {
                for (k, x) in chunk.iter_mut().enumerate() {
                    *x = c * 10 + k;
                }
            });
            assert!(v.iter().enumerate().all(|(i, &x)| x == i));
        }
    }
}
