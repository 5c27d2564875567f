//! Conditional samplers ⟨I, O, C, f⟩ with lazy, resumable enumeration.
//!
//! A sampler's generator lists a finite candidate sequence for an input
//! binding and filters each candidate through its generation-time checks.
//! The cursor into that sequence is kept per input binding, so asking again
//! with the same inputs resumes where the last call stopped.

mod grid;
mod mobile;

pub use grid::GridSpec;
pub use mobile::{move_sampler, pick_sampler, wave_sampler, WAVE_POSES};

use crate::bt::Value;
use crate::constraint::Binding;
use crate::domain::ConstraintName;
use crate::sim::{SimError, World};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("sampler `{sampler}` is missing input `{param}`")]
    IncompleteBinding { sampler: String, param: String },
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// The `f` of a sampler.
pub trait Generator: Send {
    /// Finite candidate list for `inputs`, in enumeration order.
    fn candidates(&self, inputs: &Binding, world: &World) -> Result<Vec<Binding>, SimError>;

    /// Generation-time check; maps a candidate to the emitted outputs.
    fn accept(
        &self,
        _candidate: &Binding,
        _inputs: &Binding,
        _world: &World,
    ) -> Result<Option<Binding>, SimError> {
        Ok(Some(_candidate.clone()))
    }
}

/// Candidate list independent of the world.
pub struct ListGenerator<F>(pub F);

impl<F> Generator for ListGenerator<F>
where
    F: Fn(&Binding) -> Vec<Binding> + Send,
{
    fn candidates(&self, inputs: &Binding, _: &World) -> Result<Vec<Binding>, SimError> {
        Ok((self.0)(inputs))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Cursor {
    pub position: usize,
    pub exhausted: bool,
}

pub struct ConditionalSampler {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub constraints: Vec<ConstraintName>,
    generator: Box<dyn Generator>,
    cursors: BTreeMap<String, Cursor>,
    emitted: u64,
    calls: u64,
}

impl fmt::Debug for ConditionalSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConditionalSampler")
            .field("name", &self.name)
            .field("inputs", &self.inputs)
            .field("outputs", &self.outputs)
            .field("cursors", &self.cursors)
            .finish()
    }
}

fn ids(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl ConditionalSampler {
    pub fn new(
        name: &str,
        inputs: &[&str],
        outputs: &[&str],
        constraints: Vec<ConstraintName>,
        generator: impl Generator + 'static,
    ) -> Self {
        ConditionalSampler {
            name: name.to_string(),
            inputs: ids(inputs),
            outputs: ids(outputs),
            constraints,
            generator: Box::new(generator),
            cursors: BTreeMap::new(),
            emitted: 0,
            calls: 0,
        }
    }

    /// A sampler over a fixed list of output bindings.
    pub fn from_list(name: &str, outputs: &[&str], values: Vec<Binding>) -> Self {
        ConditionalSampler::new(
            name,
            &[],
            outputs,
            Vec::new(),
            ListGenerator(move |_: &Binding| values.clone()),
        )
    }

    fn key(&self, inputs: &Binding) -> Result<(String, Binding), SamplerError> {
        let mut restricted = Binding::new();
        for p in &self.inputs {
            let v = inputs.get(p).ok_or_else(|| SamplerError::IncompleteBinding {
                sampler: self.name.clone(),
                param: p.clone(),
            })?;
            restricted.insert(p.clone(), v.clone());
        }
        let key = serde_json::to_string(&restricted).expect("values serialize");
        Ok((key, restricted))
    }

    /// Next untried output binding for `inputs`, or `None` once exhausted.
    pub fn next(&mut self, inputs: &Binding, world: &World) -> Result<Option<Binding>, SamplerError> {
        self.calls += 1;
        let (key, restricted) = self.key(inputs)?;
        let cursor = self.cursors.entry(key.clone()).or_default();
        if cursor.exhausted {
            return Ok(None);
        }
        let start = cursor.position;
        let candidates = self.generator.candidates(&restricted, world)?;
        let mut pos = start;
        let mut found = None;
        while pos < candidates.len() {
            let c = &candidates[pos];
            pos += 1;
            if let Some(out) = self.generator.accept(c, &restricted, world)? {
                found = Some(out);
                break;
            }
        }
        let cursor = self.cursors.get_mut(&key).expect("cursor exists");
        cursor.position = pos;
        if found.is_none() {
            cursor.exhausted = true;
        } else {
            self.emitted += 1;
        }
        Ok(found)
    }

    /// Clears every cursor.
    pub fn reset(&mut self) {
        self.cursors.clear();
    }

    /// Clears the cursor for one input binding.
    pub fn reset_for(&mut self, inputs: &Binding) -> Result<(), SamplerError> {
        let (key, _) = self.key(inputs)?;
        self.cursors.remove(&key);
        Ok(())
    }

    pub fn cursor_state(&self) -> BTreeMap<String, Cursor> {
        self.cursors.clone()
    }

    /// Number of emissions since construction.
    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    /// Number of `next` calls since construction.
    pub fn calls(&self) -> u64 {
        self.calls
    }
}

/// Ordered samplers ψ⃗ = (ψ₁, …, ψₙ).
#[derive(Debug, Default)]
pub struct SamplerSequence {
    pub samplers: Vec<ConditionalSampler>,
}

impl SamplerSequence {
    pub fn new(samplers: Vec<ConditionalSampler>) -> Self {
        SamplerSequence { samplers }
    }

    /// Checks that each sampler's inputs are covered by `initial` plus the
    /// outputs of earlier samplers; returns the first uncovered input.
    pub fn check_coverage<'a>(
        &'a self,
        initial: impl IntoIterator<Item = &'a str>,
    ) -> Result<(), (String, String)> {
        let mut have: Vec<&str> = initial.into_iter().collect();
        for s in &self.samplers {
            if let Some(p) = s.inputs.iter().find(|p| !have.contains(&p.as_str())) {
                return Err((s.name.clone(), p.clone()));
            }
            have.extend(s.outputs.iter().map(String::as_str));
        }
        Ok(())
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut ConditionalSampler> {
        self.samplers.iter_mut().find(|s| s.name == name)
    }

    pub fn reset(&mut self) {
        self.samplers.iter_mut().for_each(ConditionalSampler::reset);
    }
}

/// Up to `limit` elements of F(ψ⃗) in depth-first product order: the last
/// sampler advances first; a sampler's cursor restarts whenever its level
/// is re-entered with new upstream values.
pub fn enumerate_joint(
    seq: &mut [ConditionalSampler],
    initial: &Binding,
    world: &World,
    limit: usize,
) -> Result<Vec<Binding>, SamplerError> {
    let mut out = Vec::new();
    if limit > 0 {
        descend(seq, initial.clone(), world, limit, &mut out)?;
    }
    Ok(out)
}

fn descend(
    seq: &mut [ConditionalSampler],
    binding: Binding,
    world: &World,
    limit: usize,
    out: &mut Vec<Binding>,
) -> Result<(), SamplerError> {
    let Some((first, rest)) = seq.split_first_mut() else {
        out.push(binding);
        return Ok(());
    };
    first.reset_for(&binding)?;
    while out.len() < limit {
        let Some(emission) = first.next(&binding, world)? else {
            break;
        };
        let mut b = binding.clone();
        b.extend(emission);
        descend(rest, b, world, limit, out)?;
    }
    Ok(())
}

/// Writes `x` as a scalar under `key`; convenience for toy samplers.
pub fn scalar(key: &str, x: f64) -> Binding {
    let mut b = Binding::new();
    b.insert(key.to_string(), Value::Scalar(x));
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Pose2, Rect};
    use crate::sim::RobotConfig;

    fn world() -> World {
        World::new(
            RobotConfig::default(),
            Rect::new(0.0, 0.0, 1.0, 1.0),
            Pose2::new(0.5, 0.5, 0.0),
        )
    }

    fn two_point() -> ConditionalSampler {
        ConditionalSampler::from_list("p", &["a"], vec![scalar("a", 1.0), scalar("a", 2.0)])
    }

    #[test]
    fn finite_enumeration_exhausts() {
        let w = world();
        let mut s = two_point();
        let b = Binding::new();
        assert_eq!(s.next(&b, &w).unwrap(), Some(scalar("a", 1.0)));
        assert_eq!(s.next(&b, &w).unwrap(), Some(scalar("a", 2.0)));
        assert_eq!(s.next(&b, &w).unwrap(), None);
        assert_eq!(s.next(&b, &w).unwrap(), None);
        s.reset();
        assert_eq!(s.next(&b, &w).unwrap(), Some(scalar("a", 1.0)));
    }

    #[test]
    fn reset_on_fresh_sampler_is_noop() {
        let w = world();
        let mut a = two_point();
        let mut b = two_point();
        b.reset();
        assert_eq!(a.next(&Binding::new(), &w), b.next(&Binding::new(), &w));
    }

    #[test]
    fn cursor_is_per_input() {
        let w = world();
        let mut s = ConditionalSampler::new(
            "c",
            &["k"],
            &["v"],
            Vec::new(),
            ListGenerator(|i: &Binding| {
                let k = match i["k"] {
                    Value::Scalar(k) => k,
                    _ => 0.0,
                };
                vec![scalar("v", k), scalar("v", k + 0.5)]
            }),
        );
        let one = scalar("k", 1.0);
        let two = scalar("k", 2.0);
        assert_eq!(s.next(&one, &w).unwrap(), Some(scalar("v", 1.0)));
        assert_eq!(s.next(&two, &w).unwrap(), Some(scalar("v", 2.0)));
        assert_eq!(s.next(&one, &w).unwrap(), Some(scalar("v", 1.5)));
        assert!(matches!(
            s.next(&Binding::new(), &w),
            Err(SamplerError::IncompleteBinding { param, .. }) if param == "k"
        ));
    }

    #[test]
    fn empty_sequence_yields_initial() {
        let w = world();
        let init = scalar("z", 3.0);
        assert_eq!(enumerate_joint(&mut [], &init, &w, 10).unwrap(), vec![init]);
    }

    #[test]
    fn joint_order_advances_last_first() {
        let w = world();
        let mut seq = vec![
            ConditionalSampler::from_list("a", &["a"], vec![scalar("a", 0.0), scalar("a", 1.0)]),
            ConditionalSampler::from_list("b", &["b"], vec![scalar("b", 0.0), scalar("b", 1.0)]),
        ];
        let got = enumerate_joint(&mut seq, &Binding::new(), &w, 10).unwrap();
        let pairs: Vec<(f64, f64)> = got
            .iter()
            .map(|b| match (&b["a"], &b["b"]) {
                (Value::Scalar(a), Value::Scalar(b)) => (*a, *b),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(pairs, [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]);
        assert_eq!(enumerate_joint(&mut seq, &Binding::new(), &w, 3).unwrap().len(), 3);
    }

    #[test]
    fn coverage_check() {
        let seq = SamplerSequence::new(vec![ConditionalSampler::new(
            "c",
            &["k"],
            &["v"],
            Vec::new(),
            ListGenerator(|_: &Binding| Vec::new()),
        )]);
        assert!(seq.check_coverage(["k"]).is_ok());
        assert_eq!(seq.check_coverage([]), Err(("c".into(), "k".into())));
    }
}
