//! Score tables: channel-averaged SSIM per image and method, adjusted
//! against a baseline method, with paired statistics and CSV output.

use std::fmt::Write as _;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{adjusted_ssim, ssim_multichannel, SsimParams};
use crate::stats::PairedComparison;
use crate::tensor::ImageTensor;

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    image_ids: Vec<String>,
    methods: Vec<String>,
    baseline: usize,
    /// `scores[method][image]`
    scores: Vec<Vec<f64>>,
}

fn check_label(label: &str) -> Result<()> {
    if label.is_empty() || label.contains([',', '\n', '\r', '"']) {
        return Err(Error::Parameter(format!(
            "label `{label}` cannot be used in CSV"
        )));
    }
    Ok(())
}

impl Evaluation {
    /// Builds a table from precomputed scores (`scores[method][image]`).
    pub fn from_scores(
        image_ids: Vec<String>,
        methods: Vec<String>,
        baseline: &str,
        scores: Vec<Vec<f64>>,
    ) -> Result<Self> {
        for label in image_ids.iter().chain(&methods) {
            check_label(label)?;
        }
        let baseline = methods
            .iter()
            .position(|m| m == baseline)
            .ok_or_else(|| Error::Parameter(format!("baseline `{baseline}` is not a method")))?;
        if scores.len() != methods.len() || scores.iter().any(|s| s.len() != image_ids.len()) {
            return Err(Error::Dimensions(
                "score table shape does not match labels".into(),
            ));
        }
        Ok(Self {
            image_ids,
            methods,
            baseline,
            scores,
        })
    }

    /// Scores every method's outputs against the ground truth. `outputs[m][i]`
    /// is method `m`'s reconstruction of image `i`.
    pub fn score(
        truth: &[(String, ImageTensor)],
        methods: &[(String, Vec<ImageTensor>)],
        baseline: &str,
        params: &SsimParams,
    ) -> Result<Self> {
        for (label, outputs) in methods {
            if outputs.len() != truth.len() {
                return Err(Error::Dimensions(format!(
                    "method `{label}` has {} images, truth has {}",
                    outputs.len(),
                    truth.len()
                )));
            }
        }
        let scores = methods
            .iter()
            .map(|(_, outputs)| {
                outputs
                    .par_iter()
                    .zip(truth)
                    .map(|(out, (_, t))| ssim_multichannel(out, t, params))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_scores(
            truth.iter().map(|(id, _)| id.clone()).collect(),
            methods.iter().map(|(l, _)| l.clone()).collect(),
            baseline,
            scores,
        )
    }

    pub fn image_ids(&self) -> &[String] {
        &self.image_ids
    }

    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    pub fn baseline(&self) -> &str {
        &self.methods[self.baseline]
    }

    fn index_of(&self, method: &str) -> Result<usize> {
        self.methods
            .iter()
            .position(|m| m == method)
            .ok_or_else(|| Error::Parameter(format!("unknown method `{method}`")))
    }

    pub fn scores(&self, method: &str) -> Result<&[f64]> {
        Ok(&self.scores[self.index_of(method)?])
    }

    pub fn adjusted(&self, method: &str) -> Result<Vec<f64>> {
        adjusted_ssim(self.scores(method)?, &self.scores[self.baseline])
    }

    pub fn compare(&self, a: &str, b: &str) -> Result<PairedComparison> {
        PairedComparison::new(self.scores(a)?, self.scores(b)?)
    }

    /// Every method against the baseline, then every pair of non-baseline
    /// methods in table order.
    pub fn comparisons(&self) -> Result<Vec<(String, String, PairedComparison)>> {
        let base = self.baseline().to_string();
        let others: Vec<&String> = self.methods.iter().filter(|m| **m != base).collect();
        let mut out = Vec::new();
        for m in &others {
            out.push(((*m).clone(), base.clone(), self.compare(m, &base)?));
        }
        for (i, a) in others.iter().enumerate() {
            for b in &others[i + 1..] {
                out.push(((*a).clone(), (*b).clone(), self.compare(a, b)?));
            }
        }
        Ok(out)
    }

    /// Long format: `image-id,method,ssim,adjusted-ssim`.
    pub fn write_long_csv<W: Write>(&self, w: &mut W, header: &[String]) -> io::Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "image-id,method,ssim,adjusted-ssim")?;
        for (i, id) in self.image_ids.iter().enumerate() {
            for (m, method) in self.methods.iter().enumerate() {
                let s = self.scores[m][i];
                let adj = s - self.scores[self.baseline][i];
                writeln!(w, "{id},{method},{s:.10},{adj:.10}")?;
            }
        }
        Ok(())
    }

    /// Wide format: one row per image, one adjusted-SSIM column per method.
    pub fn write_adjusted_csv<W: Write>(&self, w: &mut W, header: &[String]) -> io::Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "image-id,{}", self.methods.join(","))?;
        for (i, id) in self.image_ids.iter().enumerate() {
            let row: Vec<String> = (0..self.methods.len())
                .map(|m| format!("{:.10}", self.scores[m][i] - self.scores[self.baseline][i]))
                .collect();
            writeln!(w, "{id},{}", row.join(","))?;
        }
        Ok(())
    }

    /// Human-readable statistics block.
    pub fn summary(&self, header: &[String]) -> Result<String> {
        let mut s = String::new();
        for line in header {
            let _ = writeln!(s, "# {line}");
        }
        let _ = writeln!(s, "images: {}", self.image_ids.len());
        for (m, method) in self.methods.iter().enumerate() {
            let mean = self.scores[m].iter().sum::<f64>() / self.scores[m].len().max(1) as f64;
            let _ = writeln!(s, "mean SSIM {method}: {mean:.5}");
        }
        for (a, b, cmp) in self.comparisons()? {
            let _ = writeln!(s, "{a} vs {b} {cmp}");
        }
        Ok(s)
    }
}
