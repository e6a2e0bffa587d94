//! Landmark list: `n` bucket boundaries carved out of `ceil(log2 n)` merged
//! training instances, with the half-open predecessor query that drives all
//! bucketing downstream.

use alloc::vec::Vec;
use core::fmt;

use crate::model::Instance;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VListError {
    WrongInstanceCount { expected: usize, got: usize },
    WrongInstanceSize { expected: usize, got: usize },
    NonFiniteValue,
    Unsorted,
}

impl fmt::Display for VListError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VListError::WrongInstanceCount { expected, got } => {
                write!(f, "need exactly {expected} instances, got {got}")
            }
            VListError::WrongInstanceSize { expected, got } => {
                write!(f, "every instance must have {expected} values, got {got}")
            }
            VListError::NonFiniteValue => write!(f, "instance values must be finite"),
            VListError::Unsorted => write!(f, "landmarks must be non-decreasing"),
        }
    }
}

/// Landmarks `V_1..V_n` in non-decreasing order. `V_0 = -inf` and
/// `V_{n+1} = +inf` are implicit sentinels; bucket `r` is the half-open
/// interval `[V_r, V_{r+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct VList {
    landmarks: Vec<f64>,
}

/// Number of training instances merged into a landmark list:
/// `ceil(log2 n)`, and 1 for `n = 1`.
pub fn lambda(n: usize) -> usize {
    if n <= 1 {
        return 1;
    }
    let floor = usize::ilog2(n) as usize;
    floor + usize::from(!n.is_power_of_two())
}

impl VList {
    /// Merges exactly `lambda(n)` instances of size `n`, sorts the
    /// `lambda * n` values, and keeps every `lambda`-th as a landmark.
    pub fn build(instances: &[Instance], n: usize) -> Result<Self, VListError> {
        Self::build_with(instances, n, lambda(n))
    }

    /// [`VList::build`] with an explicit merge width (still `n` landmarks).
    pub fn build_with(instances: &[Instance], n: usize, lam: usize) -> Result<Self, VListError> {
        if lam == 0 || instances.len() != lam {
            return Err(VListError::WrongInstanceCount { expected: lam, got: instances.len() });
        }
        let mut merged = Vec::with_capacity(lam * n);
        for inst in instances {
            if inst.values.len() != n {
                return Err(VListError::WrongInstanceSize {
                    expected: n,
                    got: inst.values.len(),
                });
            }
            if inst.values.iter().any(|v| !v.is_finite()) {
                return Err(VListError::NonFiniteValue);
            }
            merged.extend_from_slice(&inst.values);
        }
        merged.sort_unstable_by(f64::total_cmp);
        let landmarks = (1..=n).map(|r| merged[r * lam - 1]).collect();
        Ok(Self { landmarks })
    }

    /// Wraps already-sorted landmark values (used by deserialization).
    pub fn from_landmarks(landmarks: Vec<f64>) -> Result<Self, VListError> {
        if landmarks.iter().any(|v| !v.is_finite()) {
            return Err(VListError::NonFiniteValue);
        }
        if !landmarks.windows(2).all(|w| w[0] <= w[1]) {
            return Err(VListError::Unsorted);
        }
        Ok(Self { landmarks })
    }

    /// Number of finite landmarks.
    pub fn n(&self) -> usize {
        self.landmarks.len()
    }

    pub fn landmarks(&self) -> &[f64] {
        &self.landmarks
    }

    /// The largest `r` with `V_r <= x`; `x` then lies in `[V_r, V_{r+1})`.
    /// With repeated landmark values this picks the highest index, so the
    /// reported bucket is never an empty interval.
    pub fn predecessor(&self, x: f64) -> usize {
        self.landmarks.partition_point(|&v| v <= x)
    }

    /// Predecessor via explicit binary search, charging one three-way value
    /// comparison per probe to `comparisons` (the fallback path cost model).
    pub fn predecessor_counted(&self, x: f64, comparisons: &mut u64) -> usize {
        let mut lo = 0usize; // current known bound: V_lo <= x
        let mut hi = self.landmarks.len();
        while lo < hi {
            let mid = (lo + hi).div_ceil(2); // probes landmark V_mid, mid >= 1
            *comparisons += 1;
            if self.landmarks[mid - 1] <= x {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    }

    /// Finite value of landmark `r`, or `None` for the sentinels
    /// (`r = 0` and `r = n + 1`).
    pub fn value(&self, r: usize) -> Option<f64> {
        if r == 0 || r > self.landmarks.len() {
            None
        } else {
            Some(self.landmarks[r - 1])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn inst(values: &[f64]) -> Instance {
        Instance { values: values.to_vec(), provenance: None }
    }

    #[test]
    fn lambda_rule() {
        assert_eq!(lambda(1), 1);
        assert_eq!(lambda(2), 1);
        assert_eq!(lambda(3), 2);
        assert_eq!(lambda(4), 2);
        assert_eq!(lambda(5), 3);
        assert_eq!(lambda(16), 4);
        assert_eq!(lambda(17), 5);
        assert_eq!(lambda(256), 8);
    }

    #[test]
    fn build_takes_every_lambda_th() {
        // n=4, lambda=2: merged sorted values 1..8, landmarks at ranks 2,4,6,8.
        let v = VList::build(&[inst(&[1.0, 3.0, 5.0, 7.0]), inst(&[2.0, 4.0, 6.0, 8.0])], 4)
            .unwrap();
        assert_eq!(v.landmarks(), &[2.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn build_single_element() {
        let v = VList::build(&[inst(&[42.0])], 1).unwrap();
        assert_eq!(v.landmarks(), &[42.0]);
    }

    #[test]
    fn duplicates_keep_landmarks_non_decreasing() {
        let v = VList::build(&[inst(&[1.0, 1.0, 2.0, 2.0]), inst(&[1.0, 2.0, 2.0, 2.0])], 4)
            .unwrap();
        assert!(v.landmarks().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn wrong_counts_error() {
        assert!(matches!(
            VList::build(&[inst(&[1.0, 2.0, 3.0, 4.0])], 4),
            Err(VListError::WrongInstanceCount { expected: 2, got: 1 })
        ));
        assert!(matches!(
            VList::build(&[inst(&[1.0, 2.0])], 1),
            Err(VListError::WrongInstanceSize { .. })
        ));
    }

    #[test]
    fn predecessor_examples() {
        let v = VList::from_landmarks(vec![2.0, 4.0, 6.0, 8.0]).unwrap();
        assert_eq!(v.predecessor(5.0), 2); // 4 <= 5 < 6
        assert_eq!(v.predecessor(1.0), 0); // below every landmark
        assert_eq!(v.predecessor(4.0), 2); // boundary goes right
        assert_eq!(v.predecessor(9.0), 4); // above every landmark
    }

    #[test]
    fn predecessor_on_repeated_landmarks_takes_largest() {
        let v = VList::from_landmarks(vec![2.0, 4.0, 4.0, 8.0]).unwrap();
        assert_eq!(v.predecessor(4.0), 3);
        assert_eq!(v.predecessor(5.0), 3);
    }

    #[test]
    fn counted_predecessor_agrees() {
        let v = VList::from_landmarks(vec![1.0, 2.0, 4.0, 4.0, 7.0, 9.0, 12.0]).unwrap();
        for x in [-3.0, 0.0, 1.0, 1.5, 2.0, 4.0, 4.5, 8.9, 9.0, 100.0] {
            let mut c = 0;
            assert_eq!(v.predecessor_counted(x, &mut c), v.predecessor(x), "x={x}");
            assert!(c <= 4, "log-bounded probes, got {c}");
        }
    }

    #[test]
    fn build_is_permutation_invariant() {
        let a = VList::build(&[inst(&[3.0, 1.0, 2.0]), inst(&[9.0, 0.0, 5.0])], 3).unwrap();
        let b = VList::build(&[inst(&[9.0, 5.0, 0.0]), inst(&[1.0, 2.0, 3.0])], 3).unwrap();
        assert_eq!(a, b);
    }
}
