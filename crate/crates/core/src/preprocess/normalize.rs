use std::collections::BTreeMap;

use crate::data::{Condition, EmgRecording};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalizationMode {
    /// One maximum per channel over every recording.
    Global,
    /// One maximum per channel and condition.
    ConditionSpecific,
}

impl NormalizationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NormalizationMode::Global => "global",
            NormalizationMode::ConditionSpecific => "condition",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "global" => Some(NormalizationMode::Global),
            "condition" | "condition_specific" => Some(NormalizationMode::ConditionSpecific),
            _ => None,
        }
    }
}

/// Per-channel amplitude maxima learned by [`fit_maxima`].
#[derive(Debug, Clone, PartialEq)]
pub enum NormalizationMaxima {
    Global(Vec<f64>),
    PerCondition(BTreeMap<Condition, Vec<f64>>),
}

impl NormalizationMaxima {
    pub fn mode(&self) -> NormalizationMode {
        match self {
            NormalizationMaxima::Global(_) => NormalizationMode::Global,
            NormalizationMaxima::PerCondition(_) => NormalizationMode::ConditionSpecific,
        }
    }

    pub fn for_condition(&self, cond: &Condition) -> Result<&[f64]> {
        match self {
            NormalizationMaxima::Global(m) => Ok(m),
            NormalizationMaxima::PerCondition(map) => map
                .get(cond)
                .map(Vec::as_slice)
                .ok_or_else(|| Error::Protocol(format!("no normalization maxima for {cond}"))),
        }
    }

    pub fn apply(&self, rec: &EmgRecording) -> Result<EmgRecording> {
        let maxima = self.for_condition(&rec.condition)?;
        if maxima.len() != rec.n_channels() {
            return Err(Error::Shape(format!(
                "{} maxima for {} channels",
                maxima.len(),
                rec.n_channels()
            )));
        }
        let channels = rec
            .channels
            .iter()
            .zip(maxima)
            .map(|(ch, &m)| ch.iter().map(|v| v / m).collect())
            .collect();
        rec.with_channels(channels)
    }
}

fn channel_maxima<'a>(recs: impl Iterator<Item = &'a EmgRecording>, n: usize) -> Vec<f64> {
    let mut out = vec![f64::NEG_INFINITY; n];
    for r in recs {
        for (m, ch) in out.iter_mut().zip(&r.channels) {
            *m = ch.iter().copied().fold(*m, f64::max);
        }
    }
    out
}

fn check_positive(maxima: &[f64], names: &[String]) -> Result<()> {
    for (m, name) in maxima.iter().zip(names) {
        if !(*m > 0.0) {
            return Err(Error::Normalization {
                channel: name.clone(),
            });
        }
    }
    Ok(())
}

pub fn fit_maxima(recs: &[EmgRecording], mode: NormalizationMode) -> Result<NormalizationMaxima> {
    let first = recs
        .first()
        .ok_or_else(|| Error::Empty("normalization needs at least one recording".into()))?;
    let n = first.n_channels();
    if let Some(bad) = recs.iter().find(|r| r.n_channels() != n) {
        return Err(Error::Shape(format!(
            "recording {} has {} channels, expected {n}",
            bad.condition,
            bad.n_channels()
        )));
    }
    match mode {
        NormalizationMode::Global => {
            let m = channel_maxima(recs.iter(), n);
            check_positive(&m, &first.channel_names)?;
            Ok(NormalizationMaxima::Global(m))
        }
        NormalizationMode::ConditionSpecific => {
            let mut conds: Vec<Condition> = recs.iter().map(|r| r.condition).collect();
            conds.sort();
            conds.dedup();
            let mut map = BTreeMap::new();
            for c in conds {
                let m = channel_maxima(recs.iter().filter(|r| r.condition == c), n);
                check_positive(&m, &first.channel_names)?;
                map.insert(c, m);
            }
            Ok(NormalizationMaxima::PerCondition(map))
        }
    }
}

/// Fit maxima on `recs` and divide every channel by them.
pub fn normalize(
    recs: &[EmgRecording],
    mode: NormalizationMode,
) -> Result<(Vec<EmgRecording>, NormalizationMaxima)> {
    let maxima = fit_maxima(recs, mode)?;
    let out = recs
        .iter()
        .map(|r| maxima.apply(r))
        .collect::<Result<_>>()?;
    Ok((out, maxima))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Movement;

    fn rec(weight: f64, peak: f64) -> EmgRecording {
        let cond = Condition::new(weight, Movement::Grasping).unwrap();
        EmgRecording::new(
            500.0,
            EmgRecording::default_names(2),
            vec![vec![0.0, peak, peak / 2.0], vec![1.0, 1.0, 1.0]],
            cond,
            false,
        )
        .unwrap()
    }

    #[test]
    fn single_recording_peak_is_one() {
        let (out, _) = normalize(&[rec(0.0, 4.0)], NormalizationMode::Global).unwrap();
        assert_eq!(out[0].channels[0], vec![0.0, 1.0, 0.5]);
    }

    #[test]
    fn global_versus_condition() {
        let recs = [rec(0.0, 2.0), rec(1.1, 4.0)];
        let (g, _) = normalize(&recs, NormalizationMode::Global).unwrap();
        assert_eq!(g[0].channels[0][1], 0.5);
        assert_eq!(g[1].channels[0][1], 1.0);
        let (c, _) = normalize(&recs, NormalizationMode::ConditionSpecific).unwrap();
        assert_eq!(c[0].channels[0][1], 1.0);
        assert_eq!(c[1].channels[0][1], 1.0);
    }

    #[test]
    fn zero_channel_names_channel() {
        let mut r = rec(0.0, 1.0);
        r.channels[1] = vec![0.0; 3];
        match normalize(&[r], NormalizationMode::Global).unwrap_err() {
            Error::Normalization { channel } => assert_eq!(channel, "ch2"),
            e => panic!("unexpected {e:?}"),
        }
    }
}
