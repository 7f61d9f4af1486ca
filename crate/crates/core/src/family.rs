//! Finite-sample diagnostic for the blow-up alternatives of a solution
//! family: stays bounded, sinks uniformly to `-inf`, or blows up at a
//! vertex where the limiting `h` vanishes.
//!
//! The classification looks at the trajectory of `max u` over the family
//! (in the given order) and calls it divergent when it moves by more than
//! [`DIVERGENCE_SPAN`] overall and is monotone over the second half of the
//! samples. A sinking maximum drags the whole function to `-inf`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::VertexFunction;
use crate::model::KwProblem;

/// Total change of `max u` that counts as divergence.
pub const DIVERGENCE_SPAN: f64 = 5.0;
/// `|h(x0)| <= H_ZERO_REL * max(|h|, 1)` counts as vanishing.
pub const H_ZERO_REL: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FamilyClass {
    UniformlyBounded,
    ToMinusInfinity,
    MaxBlowup {
        vertex: usize,
        /// The last member's `h` vanishes (approximately) at `vertex`.
        h_zero_check: bool,
        /// `u` stays bounded on `{h > 0}` of the last member.
        bounded_on_positive: bool,
    },
}

fn monotone_tail(values: &[f64], increasing: bool) -> bool {
    let tail = &values[values.len() / 2..];
    tail.windows(2).all(|w| if increasing { w[1] >= w[0] } else { w[1] <= w[0] })
}

/// Classifies a family of `(problem, solution)` pairs ordered along the
/// parameter; needs at least three members.
pub fn classify_family(members: &[(KwProblem, VertexFunction)]) -> Result<FamilyClass> {
    if members.len() < 3 {
        return Err(Error::TooFewSamples(members.len()));
    }
    for (p, u) in members {
        u.check_domain(p.graph())?;
    }
    let maxs: Vec<f64> = members.iter().map(|(_, u)| u.max()).collect();
    let last = members.len() - 1;

    if maxs[last] - maxs[0] >= DIVERGENCE_SPAN && monotone_tail(&maxs, true) {
        let (p, u) = &members[last];
        let vertex = u.argmax();
        let h = p.h();
        let h_zero_check = h[vertex].abs() <= H_ZERO_REL * h.sup_norm().max(1.0);
        let positive: Vec<usize> = (0..h.len()).filter(|&x| h[x] > 0.0).collect();
        let on_positive: Vec<f64> = members
            .iter()
            .map(|(_, u)| positive.iter().map(|&x| u[x].abs()).fold(0.0, f64::max))
            .collect();
        let bounded_on_positive = on_positive[last] - on_positive[0] < DIVERGENCE_SPAN;
        return Ok(FamilyClass::MaxBlowup { vertex, h_zero_check, bounded_on_positive });
    }
    if maxs[0] - maxs[last] >= DIVERGENCE_SPAN && monotone_tail(&maxs, false) {
        return Ok(FamilyClass::ToMinusInfinity);
    }
    Ok(FamilyClass::UniformlyBounded)
}
