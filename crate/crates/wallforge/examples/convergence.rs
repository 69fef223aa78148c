//! Grid-refinement study: the discretization is second order, so halving
//! the spacing must shrink the error in energies and eigenvalues by a
//! factor of four. The Richardson ratio (E_h - E_{h/2}) / (E_{h/2} - E_{h/4})
//! measures exactly that without knowing the limit, and the same
//! extrapolation drives the solver's `refine` option.

use wallforge::grid::Grid;
use wallforge::model::{PotentialKind, PotentialSpec};
use wallforge::profile::{solve_wall_from, SolveOptions};
use wallforge::spectral::stability_spectrum;

fn main() {
    let spec = PotentialSpec::new(PotentialKind::SymmetricCubic { gamma: 3.0 }).expect("valid");
    let opts = SolveOptions { refine: false, ..Default::default() };

    // Nested grids share nodes when n -> 2n + 1.
    let sizes = [511usize, 1023, 2047];
    let mut energies = Vec::new();
    let mut lambda1 = Vec::new();
    for &n in &sizes {
        let grid = Grid::new(20.0, n).expect("valid grid");
        let wall = solve_wall_from(&spec, grid, None, opts).expect("wall solve");
        let sp = stability_spectrum(&spec, &wall.profile, 3).expect("spectrum");
        println!(
            "n = {n:5}  h = {:.5}  energy = {:.10}  lambda1(L+) = {:.8}",
            grid.spacing(),
            wall.energy,
            sp.lplus_eigs[1]
        );
        energies.push(wall.energy);
        lambda1.push(sp.lplus_eigs[1]);
    }

    let ratio = |v: &[f64]| (v[0] - v[1]) / (v[1] - v[2]);
    println!("\nRichardson ratios (4 = clean second order)");
    println!("  energy      {:.3}", ratio(&energies));
    println!("  lambda1     {:.3}", ratio(&lambda1));

    // The extrapolated energy against the closed-form value sqrt(2)/3.
    let e_star = energies[2] + (energies[2] - energies[1]) / 3.0;
    println!("\nextrapolated energy  {:.10}", e_star);
    println!("closed-form value    {:.10}", std::f64::consts::SQRT_2 / 3.0);
    println!("difference           {:.3e}", (e_star - std::f64::consts::SQRT_2 / 3.0).abs());
}
