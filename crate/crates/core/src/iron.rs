//! The built-in iron-homeostasis model, its pre-revision variant, and the
//! cut-off response check (simulate, then monitor the model's STL spec).

use crate::model::{Assignment, Model, ModelError};
use crate::ode::{simulate, stability_check, steady_state_vector, OdeError, SimOptions, Simulation, StabilityReport};
use crate::stl::{StlError, StlFormula, Verdict};

pub const IRON_V2: &str = include_str!("../../../models/iron_v2.model");
pub const PRE_REVISION: &str = include_str!("../../../fixtures/pre_revision.model");

/// Names accepted by [`model_by_name`].
pub const BUILTIN_NAMES: [&str; 2] = ["iron_v2", "pre_revision"];

pub fn builtin_iron_model() -> Model {
    Model::parse(IRON_V2).expect("shipped model parses")
}

/// The inconsistent model before revision and the consistent one after.
pub fn revision_workflow_fixture() -> (Model, Model) {
    (Model::parse(PRE_REVISION).expect("shipped fixture parses"), builtin_iron_model())
}

pub fn model_by_name(name: &str) -> Option<Model> {
    match name {
        "iron_v2" | "iron" => Some(builtin_iron_model()),
        "pre_revision" => Some(revision_workflow_fixture().0),
        _ => None,
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ResponseError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("the model has no STL specification")]
    NoSpec,
}

/// The model's STL spec with every referenced unknown bound to its value in `a`.
pub fn bound_spec(m: &Model, a: &Assignment) -> Result<StlFormula, ResponseError> {
    let text = m.stl().ok_or(ResponseError::NoSpec)?;
    let signals: Vec<&str> = m.states().iter().map(String::as_str).collect();
    let params: Vec<&str> = m.unknown_names().iter().map(String::as_str).collect();
    let f = StlFormula::parse_with_params(text, &signals, &params).map_err(StlError::from)?;
    let values: Vec<(&str, f64)> = f
        .params()
        .iter()
        .filter_map(|p| a.get_by_name(p).map(|v| (p.as_str(), v)))
        .collect();
    Ok(f.bind(values))
}

#[derive(Debug)]
pub struct Response {
    pub stability: StabilityReport,
    pub simulation: Simulation,
    pub verdict: Verdict,
}

/// Classifies the steady state of `a`, simulates from it through the
/// model's events over the spec horizon, and monitors the spec.
pub fn cutoff_response(m: &Model, a: &Assignment, opts: &SimOptions) -> Result<Response, ResponseError> {
    let spec = bound_spec(m, a)?;
    let y0 = steady_state_vector(m, a)?;
    let stability = stability_check(m, a, &y0)?;
    let simulation = simulate(m, a, &y0, spec.horizon().max(1.0), opts)?;
    let verdict = spec.satisfies(&simulation.trace)?;
    Ok(Response {
        stability,
        simulation,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Relation;

    #[test]
    fn shape_of_the_builtin_model() {
        let m = builtin_iron_model();
        assert_eq!(m.states().len(), 15);
        assert_eq!(m.parameters().len(), 28);
        let dp = m.unknowns()[m.unknown_index("dp_Ft").unwrap()].domain;
        assert_eq!((dp.lo(), dp.hi()), (3.8e-6, 3.8e-5));
        match m.constraint("tfr1_turnover").unwrap().relation {
            Relation::In(r) => assert_eq!((r.lo(), r.hi()), (7.0e-6, 7.0e-5)),
            ref r => panic!("{r:?}"),
        }
        for id in ["ft_ire5_ratio", "tfr1_bound_stable", "ire3_bound_stable"] {
            assert!(m.constraint(id).is_some());
        }
        assert!(m.events().iter().any(|e| e.label == "cutoff"));
    }

    #[test]
    fn fixture_differs_by_one_low_reliability_constraint() {
        let (pre, post) = revision_workflow_fixture();
        assert_eq!(pre.constraints().len(), post.constraints().len() + 1);
        assert!(pre.constraint("tfr1_stabilization").unwrap().has_tag(crate::model::TAG_LOW_RELIABILITY));
        assert!(model_by_name("nope").is_none());
    }
}
