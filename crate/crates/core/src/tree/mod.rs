//! Rooted K-ary trees, the forward (cavity) Green-function recursion and the
//! disorder-free closed forms.

mod free;
mod green;
mod topology;

pub use free::{
    free_forward_green, free_lattice_green, free_lyapunov, spectrum_edges, weak_disorder_threshold,
};
pub use green::{
    diagonal_green, eigenvalues_below, ground_state_by_inertia, forward_recursion, forward_recursion_with,
    homogeneous_vertex_green, level_recursion, path_green, path_green_magnitude, root_row,
    Boundary, GreenState, PotentialSample, SpectralPoint, RESONANCE_FLOOR,
};
pub use topology::TreeTopology;
