//! Window lists: CSV rows `top,left,height,width,role` with role `target` or
//! `background`. A header line and `#` comments are allowed.

use std::path::Path;

use altruist::metrics::WindowSpec;

use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WindowSet {
    pub targets: Vec<WindowSpec>,
    pub backgrounds: Vec<WindowSpec>,
}

impl WindowSet {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut set = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("top") {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let err = |why: &str| CliError::Invalid(format!("windows line {}: {why}: {line:?}", lineno + 1));
            if f.len() != 5 {
                return Err(err("expected top,left,height,width,role"));
            }
            let n: Vec<usize> = f[..4].iter().map(|s| s.parse()).collect::<Result<_, _>>().map_err(|_| err("bad number"))?;
            let w = WindowSpec::new(n[0], n[1], n[2], n[3]);
            match f[4] {
                "target" => set.targets.push(w),
                "background" => set.backgrounds.push(w),
                _ => return Err(err("role must be target or background")),
            }
        }
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("top,left,height,width,role\n");
        for (role, list) in [("target", &self.targets), ("background", &self.backgrounds)] {
            for w in list {
                s.push_str(&format!("{},{},{},{},{role}\n", w.top_row, w.left_col, w.height, w.width));
            }
        }
        s
    }

    /// Checks every window against the image, naming the first offender.
    pub fn validate(&self, dim: (usize, usize)) -> Result<(), CliError> {
        for (i, w) in self.targets.iter().chain(&self.backgrounds).enumerate() {
            w.validate(dim).map_err(|e| CliError::Invalid(format!("window {i}: {e}")))?;
        }
        Ok(())
    }
}
