//! Minimal fork-join helper honoring the `MMS_THREADS` cap.

use std::sync::OnceLock;

fn thread_cap() -> usize {
    static CAP: OnceLock<usize> = OnceLock::new();
    *CAP.get_or_init(|| {
        let avail = std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1);
        match std::env::var("MMS_THREADS") {
            Ok(v) => v.parse::<usize>().ok().filter(|&n| n > 0).unwrap_or(avail),
            Err(_) => avail,
        }
    })
}

/// Runs `f(start, out_chunk)` over disjoint chunks of `out`, in parallel when
/// the work is large enough. `f` must be a pure function of the chunk bounds.
pub fn for_chunks<T: Send, F>(out: &mut [T], min_chunk: usize, f: F)
where
    F: Fn(usize, &mut [T]) + Sync,
{
    let n = out.len();
    let threads = thread_cap().min(n / min_chunk.max(1)).max(1);
    if threads <= 1 {
        f(0, out);
        return;
    }
    let chunk = n.div_ceil(threads);
    std::thread::scope(|s| {
        for (ci, part) in out.chunks_mut(chunk).enumerate() {
            let f = &f;
            s.spawn(move || f(ci * chunk, part));
        }
    });
}
