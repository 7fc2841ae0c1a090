//! Ordered evaluation of independent replicas.
//!
//! Each replica receives its own index and derives its seed from it, so the
//! output is identical with or without the `parallel` feature.

/// Evaluates `f(0..count)` and returns the results in index order.
pub fn map_replicas<T, F>(count: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

/// Splits `total` work items into `chunks` nearly equal contiguous ranges.
pub fn chunk_ranges(total: u64, chunks: u64) -> Vec<std::ops::Range<u64>> {
    let chunks = chunks.max(1).min(total.max(1));
    let base = total / chunks;
    let extra = total % chunks;
    let mut out = Vec::with_capacity(chunks as usize);
    let mut start = 0;
    for c in 0..chunks {
        let len = base + u64::from(c < extra);
        out.push(start..start + len);
        start += len;
    }
    out
}
