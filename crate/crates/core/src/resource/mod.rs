//! Resource theory of thermodynamics with noncommuting charges: payoff
//! operator, free unitaries, passivity, Rényi free energies and second laws.

mod laws;
mod payoff;
mod renyi;
mod unitary;

pub use laws::{
    average_work_bound, extractable_work_bound, nats_preservation_check, second_laws_check, work_extraction_search,
    NatoChannel, NatoSampler, QuantumViolation, TransitionVerdict, WorkSearchResult, DIAGONAL_TOL, MONOTONE_TOL,
};
pub use payoff::{
    average_work, passivity_check, payoff_operator, EigenGroup, Level, PassivityResult, PassivityWitness,
    PayoffFunction, DEGENERACY_TOL, PASSIVITY_TOL,
};
pub use renyi::{
    classical_renyi, f1_decomposition, free_energy_profile, quantum_renyi, F1Decomposition, FreeEnergyProfile,
    RenyiVariant,
};
pub use unitary::{
    covariance_defect, is_free_unitary, random_free_unitary, reference_frame_unitary, sector_leakage,
    CommutantProjector, DiscreteU1, FreeUnitaryCheck, UNITARITY_TOL,
};
