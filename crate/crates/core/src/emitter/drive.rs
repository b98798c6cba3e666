use serde::{Deserialize, Serialize};

use super::EmitterError;

/// One constant-amplitude piece of the first-laser drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSegment {
    pub start: f64,
    pub end: f64,
    pub amplitude: f64,
}

/// Piecewise-constant first-laser Rabi frequency `Ω1(t)` on `[0, duration]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveProfile {
    pub segments: Vec<DriveSegment>,
    pub duration: f64,
}

impl DriveProfile {
    pub fn new(segments: Vec<DriveSegment>, duration: f64) -> Result<Self, EmitterError> {
        let d = DriveProfile { segments, duration };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), EmitterError> {
        if !(self.duration > 0.0) {
            return Err(EmitterError::Config(format!(
                "drive duration must be > 0, got {}",
                self.duration
            )));
        }
        let mut prev_end = 0.0;
        for (k, s) in self.segments.iter().enumerate() {
            if !(s.start >= prev_end && s.end > s.start && s.end <= self.duration * (1.0 + 1e-12)) {
                return Err(EmitterError::Config(format!(
                    "drive segment {k} [{}, {}] overlaps, is empty or exceeds the window",
                    s.start, s.end
                )));
            }
            if !(s.amplitude >= 0.0) {
                return Err(EmitterError::Config(format!(
                    "drive segment {k} amplitude {} must be >= 0",
                    s.amplitude
                )));
            }
            prev_end = s.end;
        }
        Ok(())
    }

    pub fn amplitude_at(&self, t: f64) -> f64 {
        self.segments
            .iter()
            .find(|s| t >= s.start && t < s.end)
            .map_or(0.0, |s| s.amplitude)
    }

    pub fn max_amplitude(&self) -> f64 {
        self.segments.iter().map(|s| s.amplitude).fold(0.0, f64::max)
    }

    /// Midpoint of the first gap between driven segments, or of the window
    /// when there is none.
    pub fn bin_boundary(&self) -> f64 {
        for w in self.segments.windows(2) {
            if w[1].start > w[0].end {
                return 0.5 * (w[0].end + w[1].start);
            }
        }
        0.5 * self.duration
    }

    /// Breakpoints where the amplitude may change, including 0 and the end.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v = vec![0.0, self.duration];
        for s in &self.segments {
            v.push(s.start);
            v.push(s.end);
        }
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-18);
        v
    }

    pub fn time_scaled(&self, factor: f64, amplitude_factor: f64) -> Self {
        DriveProfile {
            segments: self
                .segments
                .iter()
                .map(|s| DriveSegment {
                    start: s.start * factor,
                    end: s.end * factor,
                    amplitude: s.amplitude * amplitude_factor,
                })
                .collect(),
            duration: self.duration * factor,
        }
    }
}

/// Early pulse, pause and late pulse with an adjustable pause start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveTemplate {
    pub amplitude: f64,
    pub late_amplitude: f64,
    pub pause_start: f64,
    pub pause_length: f64,
    pub late_length: f64,
    pub duration: f64,
}

impl Default for DriveTemplate {
    fn default() -> Self {
        DriveTemplate {
            amplitude: 2.0e8,
            late_amplitude: 4.0e8,
            pause_start: 11.0e-9,
            pause_length: 6.0e-9,
            late_length: 30.0e-9,
            duration: 70.0e-9,
        }
    }
}

impl DriveTemplate {
    pub fn with_pause_start(mut self, t: f64) -> Self {
        self.pause_start = t;
        self
    }

    pub fn profile(&self) -> Result<DriveProfile, EmitterError> {
        let late_start = self.pause_start + self.pause_length;
        DriveProfile::new(
            vec![
                DriveSegment {
                    start: 0.0,
                    end: self.pause_start,
                    amplitude: self.amplitude,
                },
                DriveSegment {
                    start: late_start,
                    end: late_start + self.late_length,
                    amplitude: self.late_amplitude,
                },
            ],
            self.duration,
        )
    }

    /// Largest admissible pause start inside the window.
    pub fn max_pause_start(&self) -> f64 {
        self.duration - self.pause_length - self.late_length
    }

    pub fn time_scaled(&self, factor: f64, amplitude_factor: f64) -> Self {
        DriveTemplate {
            amplitude: self.amplitude * amplitude_factor,
            late_amplitude: self.late_amplitude * amplitude_factor,
            pause_start: self.pause_start * factor,
            pause_length: self.pause_length * factor,
            late_length: self.late_length * factor,
            duration: self.duration * factor,
        }
    }
}
