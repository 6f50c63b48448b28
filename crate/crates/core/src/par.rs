//! Data-parallel helpers. With the `parallel` feature (on by default) these
//! run on the rayon pool; without it they are plain sequential loops. Results
//! are always returned in input order, so output never depends on scheduling.

/// Sequential implementations, always available for comparison.
pub mod sequential {
    pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
    where
        F: Fn(usize) -> U,
    {
        (0..n).map(f).collect()
    }

    pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
    where
        F: Fn(&T) -> U,
    {
        items.iter().map(f).collect()
    }
}

pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(feature = "parallel")]
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    sequential::map_range(n, f)
}

#[cfg(feature = "parallel")]
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    sequential::map_slice(items, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree_in_order() {
        let f = |i: usize| (i * i) as u64 ^ 0x5a;
        assert_eq!(map_range(1000, f), sequential::map_range(1000, f));
        let items: Vec<u32> = (0..257).collect();
        assert_eq!(map_slice(&items, |x| x + 1), sequential::map_slice(&items, |x| x + 1));
    }
}
