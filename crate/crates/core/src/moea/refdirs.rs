//! Simplex-lattice reference directions and the population-size table.

use super::MoeaError;

/// Binomial coefficient `C(n, k)`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PopulationSize {
    pub n: usize,
    pub h1: usize,
    pub h2: usize,
}

/// Population size and lattice layers for `m` objectives.
///
/// Seven objectives use `(H1, H2) = (4, 1)`: that is the layering whose
/// lattice size equals the tabulated population of 217.
pub fn population_size(m: usize) -> Result<PopulationSize, MoeaError> {
    let (n, h1, h2) = match m {
        2 => (100, 99, 0),
        3 => (105, 13, 0),
        4 => (120, 7, 0),
        5 => (126, 5, 0),
        6 => (132, 4, 1),
        7 => (217, 4, 1),
        _ => return Err(MoeaError::UnsupportedObjectiveCount(m)),
    };
    Ok(PopulationSize { n, h1, h2 })
}

/// Number of vectors [`das_dennis`] returns.
pub fn lattice_size(m: usize, h1: usize, h2: usize) -> usize {
    let outer = binomial(h1 + m - 1, m - 1);
    if h2 > 0 {
        outer + binomial(h2 + m - 1, m - 1)
    } else {
        outer
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceDirections {
    pub vectors: Vec<Vec<f64>>,
    pub h1: usize,
    pub h2: usize,
}

fn lattice(m: usize, h: usize) -> Vec<Vec<f64>> {
    fn recurse(m: usize, h: usize, left: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if current.len() == m - 1 {
            current.push(left);
            out.push(current.iter().map(|&c| c as f64 / h as f64).collect());
            current.pop();
            return;
        }
        for c in 0..=left {
            current.push(c);
            recurse(m, h, left - c, current, out);
            current.pop();
        }
    }
    let mut out = Vec::with_capacity(binomial(h + m - 1, m - 1));
    recurse(m, h, h, &mut Vec::with_capacity(m), &mut out);
    out
}

/// Two-layer Das-Dennis directions: the `h1` lattice, plus the `h2` lattice
/// shrunk halfway toward the simplex centroid when `h2 > 0`.
pub fn das_dennis(m: usize, h1: usize, h2: usize) -> Result<ReferenceDirections, MoeaError> {
    if m < 2 {
        return Err(MoeaError::UnsupportedObjectiveCount(m));
    }
    if h1 == 0 {
        return Err(MoeaError::InvalidLattice(h1));
    }
    let mut vectors = lattice(m, h1);
    if h2 > 0 {
        let centre = 1.0 / (2.0 * m as f64);
        vectors.extend(lattice(m, h2).into_iter().map(|v| v.into_iter().map(|x| x / 2.0 + centre).collect()));
    }
    Ok(ReferenceDirections { vectors, h1, h2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_values() {
        let expected = [(2, 100), (3, 105), (4, 120), (5, 126), (6, 132), (7, 217)];
        for (m, n) in expected {
            let ps = population_size(m).unwrap();
            assert_eq!(ps.n, n);
            assert_eq!(lattice_size(m, ps.h1, ps.h2), n, "M={m}");
            assert_eq!(das_dennis(m, ps.h1, ps.h2).unwrap().vectors.len(), n);
        }
        assert_eq!(binomial(9, 5) + binomial(6, 5), 132);
        assert_eq!(binomial(10, 6) + binomial(7, 6), 217);
        // the (3, 2) layering listed alongside N = 217 only yields 112 vectors
        assert_eq!(lattice_size(7, 3, 2), 112);
        assert!(population_size(1).is_err());
        assert!(population_size(8).is_err());
    }

    #[test]
    fn two_objective_lattice() {
        let d = das_dennis(2, 99, 0).unwrap();
        assert_eq!(d.vectors.len(), 100);
        for (k, v) in d.vectors.iter().enumerate() {
            assert!((v[0] - k as f64 / 99.0).abs() < 1e-15);
            assert!((v[0] + v[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn vectors_on_simplex() {
        for (m, h1, h2) in [(3, 13, 0), (6, 4, 1), (7, 4, 1), (7, 3, 2)] {
            for v in das_dennis(m, h1, h2).unwrap().vectors {
                assert!(v.iter().all(|&x| x >= 0.0));
                assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        assert!(das_dennis(3, 0, 0).is_err());
    }
}
