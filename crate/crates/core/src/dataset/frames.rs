use super::{DatasetError, Result};

/// Frame indices `round(k * interval_s * fps)` for k = 0, 1, ... while below
/// `frame_count`, de-duplicated in order.
pub fn select_frames(frame_count: u64, interval_s: f64, fps: f64) -> Result<Vec<u64>> {
    if frame_count == 0 {
        return Err(DatasetError::InvalidArgument("frame_count must be positive".into()));
    }
    if !(interval_s > 0.0 && interval_s.is_finite()) {
        return Err(DatasetError::InvalidArgument(format!("interval must be positive, got {interval_s}")));
    }
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(DatasetError::InvalidArgument(format!("fps must be positive, got {fps}")));
    }
    let step = interval_s * fps;
    let mut out: Vec<u64> = Vec::new();
    for k in 0u64.. {
        let idx = (k as f64 * step).round();
        if idx >= frame_count as f64 {
            break;
        }
        let idx = idx as u64;
        if out.last() != Some(&idx) {
            out.push(idx);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifteen_minutes_at_8_7_hz() {
        let frames = select_frames(7830, 30.0, 8.7).unwrap();
        assert_eq!(frames.len(), 30);
        assert_eq!(&frames[..3], &[0, 261, 522]);
        assert_eq!(*frames.last().unwrap(), 29 * 261);
    }

    #[test]
    fn boundaries() {
        assert_eq!(select_frames(1, 30.0, 8.7).unwrap(), vec![0]);
        assert_eq!(select_frames(100, 3600.0, 8.7).unwrap(), vec![0]);
        // Sub-frame intervals collapse onto the same frame and are de-duplicated.
        assert_eq!(select_frames(3, 0.1, 2.0).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn rejects_non_positive_arguments() {
        assert!(select_frames(0, 30.0, 8.7).is_err());
        assert!(select_frames(10, 0.0, 8.7).is_err());
        assert!(select_frames(10, 30.0, -1.0).is_err());
        assert!(select_frames(10, f64::NAN, 8.7).is_err());
    }
}
