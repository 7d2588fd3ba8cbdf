//! LSTD on a two-state, two-action chain with an exhaustive weighted dataset,
//! next to the exact Bellman solution.
//!
//! `cargo run --example tabular_lstd`

use nalgebra::{DMatrix, DVector};
use netspec::critic::{assemble_from_rows, lstd_solve, Ridge};

fn main() -> netspec::Result<()> {
    let gamma = 0.9;
    let p1 = [[0.2, 0.7], [0.6, 0.1]]; // P(s' = 1 | s, a)
    let pi = [[0.3, 0.7], [0.55, 0.45]];
    let r = [[1.0, -0.5], [0.25, 2.0]];
    let trans = |s: usize, a: usize, s2: usize| if s2 == 1 { p1[s][a] } else { 1.0 - p1[s][a] };
    // Reward plus three indicators spans all four state-action pairs.
    let feature = |s: usize, a: usize| {
        let k = 2 * s + a;
        vec![r[s][a], (k == 0) as u8 as f64, (k == 1) as u8 as f64, (k == 2) as u8 as f64]
    };
    let (mut cur, mut nxt, mut w) = (Vec::new(), Vec::new(), Vec::new());
    let mut p_pi = DMatrix::zeros(4, 4);
    for s in 0..2 {
        for a in 0..2 {
            for s2 in 0..2 {
                for a2 in 0..2 {
                    cur.push(feature(s, a));
                    nxt.push(feature(s2, a2));
                    w.push(0.25 * trans(s, a, s2) * pi[s2][a2]);
                    p_pi[(2 * s + a, 2 * s2 + a2)] = trans(s, a, s2) * pi[s2][a2];
                }
            }
        }
    }
    let weights = lstd_solve(&assemble_from_rows(&cur, &nxt, Some(&w), gamma)?, Ridge::Fixed(0.0), false)?;
    let rv = DVector::from_iterator(4, r.iter().flatten().copied());
    let exact = (DMatrix::identity(4, 4) - p_pi * gamma).lu().solve(&rv).expect("nonsingular");
    for s in 0..2 {
        for a in 0..2 {
            println!("Q({s},{a}): LSTD {:>9.6}  exact {:>9.6}", weights.q_hat(&feature(s, a)), exact[2 * s + a]);
        }
    }
    Ok(())
}
