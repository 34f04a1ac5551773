use crate::error::{Error, Result};

fn check(pred: &[f64], target: &[f64]) -> Result<()> {
    if pred.len() != target.len() {
        return Err(Error::Length(format!(
            "{} predictions for {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.len() < 2 {
        return Err(Error::Metric("metrics need at least two samples".into()));
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn rmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    check(pred, target)?;
    let ss: f64 = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum();
    Ok((ss / pred.len() as f64).sqrt())
}

pub fn pearson(pred: &[f64], target: &[f64]) -> Result<f64> {
    check(pred, target)?;
    let (mp, mt) = (mean(pred), mean(target));
    let (mut spt, mut spp, mut stt) = (0.0, 0.0, 0.0);
    for (p, t) in pred.iter().zip(target) {
        spt += (p - mp) * (t - mt);
        spp += (p - mp) * (p - mp);
        stt += (t - mt) * (t - mt);
    }
    if stt == 0.0 {
        return Err(Error::Metric(
            "correlation undefined for a constant target".into(),
        ));
    }
    if spp == 0.0 {
        return Err(Error::Metric(
            "correlation undefined for a constant prediction".into(),
        ));
    }
    Ok((spt / (spp * stt).sqrt()).clamp(-1.0, 1.0))
}

pub fn r2(pred: &[f64], target: &[f64]) -> Result<f64> {
    check(pred, target)?;
    let mt = mean(target);
    let ss_tot: f64 = target.iter().map(|t| (t - mt).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Metric("R² undefined for a constant target".into()));
    }
    let ss_res: f64 = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointScore {
    pub rmse: f64,
    pub r2: f64,
    pub rho: f64,
}

pub fn score(pred: &[f64], target: &[f64]) -> Result<JointScore> {
    Ok(JointScore {
        rmse: rmse(pred, target)?,
        r2: r2(pred, target)?,
        rho: pearson(pred, target)?,
    })
}
