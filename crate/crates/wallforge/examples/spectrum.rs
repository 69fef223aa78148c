//! Linearization spectrum of the wall: the real-part operator must carry
//! the translation mode at eigenvalue zero and nothing below it, the
//! imaginary-part operator must be nonnegative, and the constrained
//! Rayleigh quotient of the full linearized flow must be nonnegative
//! (spectral stability). A coarse grid at the end cross-checks the
//! iterative route against a dense solve of the same pencil.

use wallforge::grid::Grid;
use wallforge::model::{PotentialKind, PotentialSpec};
use wallforge::profile::solve_wall;
use wallforge::spectral::{cross_validate, stability_spectrum};

fn main() {
    for gamma in [1.5, 3.0, 5.0] {
        let spec = PotentialSpec::new(PotentialKind::SymmetricCubic { gamma }).expect("valid");
        let grid = Grid::new(20.0, 2047).expect("valid grid");
        let wall = solve_wall(&spec, grid).expect("wall solve");
        let sp = stability_spectrum(&spec, &wall.profile, 6).expect("spectrum");

        println!("gamma = {gamma}");
        println!("  L+ eigenvalues      {:?}", rounded(&sp.lplus_eigs));
        println!("  L- eigenvalues      {:?}", rounded(&sp.lminus_eigs));
        println!("  zero-mode overlap   {:.9} (translation mode found)", sp.zero_mode_overlap);
        println!("  essential edge      {:.4}, spectral gap {:.4} (ok: {})",
            sp.essential_edge, sp.spectral_gap, sp.gap_ok);
        println!("  Rayleigh -lambda^2  {:+.3e} (denominator positive: {})",
            sp.neg_lambda_sq, sp.denominator_positive);
        println!("  verdict             {:?}\n", sp.verdict);
    }

    // Dense cross-validation is O(n^3); run it on a coarse grid only.
    let spec = PotentialSpec::new(PotentialKind::SymmetricCubic { gamma: 3.0 }).expect("valid");
    let coarse = Grid::new(15.0, 301).expect("valid grid");
    let wall = solve_wall(&spec, coarse).expect("wall solve");
    let cv = cross_validate(&spec, &wall.profile).expect("dense cross-check");
    println!("coarse-grid cross-validation (gamma = 3, n = 301)");
    println!("  Rayleigh minimum    {:+.6e}", cv.rayleigh_min);
    println!("  dense pencil min    {:+.6e}", cv.pencil_min);
    println!("  nearest dense nu    {:+.6e} (gap {:.3e})", cv.nearest_nu, cv.nu_gap);
    println!("  max |Re lambda|     {:.3e} away from the zero cluster ({} zero modes)",
        cv.max_re_lambda, cv.zero_cluster);
}

fn rounded(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1e6).round() / 1e6).collect()
}
