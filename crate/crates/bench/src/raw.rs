use std::ops::Range;

/// Unchecked view of a mutable slice, shared by team members or tasks that
/// write disjoint parts of it.
pub(crate) struct RawSlice<T> {
    ptr: *mut T,
    len: usize,
}

impl<T> Clone for RawSlice<T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<T> Copy for RawSlice<T> {}

// SAFETY: users only touch disjoint elements from different threads and
// keep the underlying slice alive until every user has finished.
unsafe impl<T: Send> Send for RawSlice<T> {}
unsafe impl<T: Send> Sync for RawSlice<T> {}

impl<T> RawSlice<T> {
    pub(crate) fn new(s: &mut [T]) -> Self {
        RawSlice {
            ptr: s.as_mut_ptr(),
            len: s.len(),
        }
    }

    pub(crate) fn len(self) -> usize {
        self.len
    }

    pub(crate) fn sub(self, range: Range<usize>) -> Self {
        assert!(range.start <= range.end && range.end <= self.len);
        RawSlice {
            // SAFETY: in bounds, checked above
            ptr: unsafe { self.ptr.add(range.start) },
            len: range.end - range.start,
        }
    }

    /// # Safety
    /// No other live reference may overlap the returned slice.
    #[allow(clippy::mut_from_ref)]
    pub(crate) unsafe fn as_mut<'a>(self) -> &'a mut [T] {
        std::slice::from_raw_parts_mut(self.ptr, self.len)
    }

    /// # Safety
    /// `i < len` and no other thread accesses element `i` concurrently.
    pub(crate) unsafe fn at<'a>(self, i: usize) -> &'a mut T {
        debug_assert!(i < self.len);
        &mut *self.ptr.add(i)
    }
}
