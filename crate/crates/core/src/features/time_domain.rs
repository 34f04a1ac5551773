use crate::error::{Error, Result};

pub fn rms(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Length("rms of an empty window".into()));
    }
    Ok((x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt())
}

pub fn waveform_length(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::Length(format!(
            "waveform length needs 2 samples, got {}",
            x.len()
        )));
    }
    Ok(x.windows(2).map(|w| (w[1] - w[0]).abs()).sum())
}

/// Interior samples where `(x[i]−x[i−1])·(x[i]−x[i+1])` exceeds `threshold`.
pub fn slope_sign_changes(x: &[f64], threshold: f64) -> Result<usize> {
    if x.len() < 3 {
        return Err(Error::Length(format!(
            "slope sign changes need 3 samples, got {}",
            x.len()
        )));
    }
    Ok(x.windows(3)
        .filter(|w| (w[1] - w[0]) * (w[1] - w[2]) > threshold)
        .count())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rms_cases() {
        assert!((rms(&[0.4; 7]).unwrap() - 0.4).abs() < 1e-15);
        assert!((rms(&[3.0, -4.0]).unwrap() - 3.535_533_905_932_737_6).abs() < 1e-12);
        assert_eq!(rms(&[0.0; 5]).unwrap(), 0.0);
        assert!(rms(&[]).is_err());
    }

    #[test]
    fn wl_cases() {
        assert_eq!(waveform_length(&[2.0; 6]).unwrap(), 0.0);
        assert_eq!(waveform_length(&[0.0, 1.0, 0.0, 1.0]).unwrap(), 3.0);
        let ramp: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
        assert_eq!(waveform_length(&ramp).unwrap(), 1.0);
    }

    #[test]
    fn ssc_cases() {
        let ramp: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(slope_sign_changes(&ramp, 1e-8).unwrap(), 0);
        assert_eq!(
            slope_sign_changes(&[0.0, 1.0, 0.0, 1.0, 0.0], 0.0).unwrap(),
            3
        );
        assert_eq!(slope_sign_changes(&[1.0; 5], 0.0).unwrap(), 0);
    }
}
