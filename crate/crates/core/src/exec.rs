//! Bounded-concurrency map for blocking client calls.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Applies `f` to every item with at most `limit` calls in flight and, if
/// `min_interval` is set, call starts spaced at least that far apart.
/// Results come back in input order whatever order the calls finish in.
pub fn map_bounded<T, R, F>(items: &[T], limit: usize, min_interval: Option<Duration>, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = limit.max(1).min(items.len());
    if workers <= 1 && min_interval.is_none() {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    let gate = Mutex::new(Instant::now());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                if let Some(interval) = min_interval {
                    let mut earliest = gate.lock().expect("rate gate");
                    let now = Instant::now();
                    if *earliest > now {
                        std::thread::sleep(*earliest - now);
                    }
                    *earliest = Instant::now() + interval;
                }
                let r = f(&items[i]);
                *slots[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    slots.into_iter().map(|s| s.into_inner().expect("result slot").expect("every item processed")).collect()
}
