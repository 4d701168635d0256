//! Consumption-dependent random utility over repeated menus.
//!
//! Random joint choice rules over `T` periods, their Möbius inverse, the axioms that
//! characterize consistency with a consumption-dependent random utility model, an
//! explicit recovery of the representation, two cone feasibility tests for two-period
//! data, and the habit-formation and learning logit models.

pub mod axioms;
pub mod data;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod lattice;
pub mod lptest;
pub mod mobius;
pub mod parametric;
pub mod recovery;
pub mod scalar;
pub mod simulate;

pub use axioms::{check_all, check_cdrum, check_si_cdrum, AxiomReport, Relation, Verdict, Witness};
pub use data::{
    from_conditional, to_conditional, validate_rjcr, ConditionalChoiceSystem, History, MenuSequence,
    ObservationDomain, RandomJointChoiceRule, RawObservation, Validated,
};
pub use error::{Error, Result};
pub use io::{load_dataset, parse_dataset, save_dataset};
pub use lattice::{Alt, LinearOrder, Menu, Universe};
pub use lptest::{
    build_e, build_f, matrix_sizes, oracle_agreement, solve_cone_feasibility, test_cdrum_facet, test_cdrum_vertex,
    Omega, QuadraticTestResult, TestOptions,
};
pub use mobius::{mobius_inverse, mobius_reconstruct, truncated_mobius, LatticeTable, MobiusTable};
pub use parametric::{
    classify, eval_habit_logit, eval_learning_logit, identify_habit_logit, identify_learning_logit,
    stationary_distribution, stationary_from_utilities, HabitLogitParams, LearningLogitParams, LogitParams, StreakSignature,
};
pub use recovery::{
    evaluate_representation, recover_representation, verify_representation, CdrumRepresentation,
    PreferenceDistribution, TransitionFunction,
};
pub use scalar::{NumericMode, Rational, Scalar};
pub use simulate::{perturb, random_mixture, sample_choices, ChoiceSource, ExtremePoint, Mixture};
