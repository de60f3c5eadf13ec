use alloc::string::String;

/// Window sizes and rendering options for one structuring run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringConfig {
    /// Segments shown to the predictor per step.
    pub input_window: usize,
    /// Actions committed per step.
    pub output_window: usize,
    /// Separator used when a node's content list is rendered as one string.
    pub join_separator: String,
    /// Maximum characters per rendered stack entry (head kept).
    pub stack_entry_truncation: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("input window must be at least 1")]
    ZeroInputWindow,
    #[error("output window must satisfy 1 <= w_O <= w_I (got w_I={input}, w_O={output})")]
    BadOutputWindow { input: usize, output: usize },
}

impl Default for StructuringConfig {
    fn default() -> Self {
        StructuringConfig {
            input_window: 1,
            output_window: 1,
            join_separator: String::from(" "),
            stack_entry_truncation: None,
        }
    }
}

impl StructuringConfig {
    /// Checked constructor with the default separator and no truncation.
    pub fn new(input_window: usize, output_window: usize) -> Result<Self, ConfigError> {
        let config = StructuringConfig {
            input_window,
            output_window,
            ..Default::default()
        };
        config.validate()?;
        Ok(config)
    }

    /// One-pass mode: every segment is seen and resolved exactly once.
    pub fn one_pass(window: usize) -> Result<Self, ConfigError> {
        Self::new(window, window)
    }

    pub fn with_separator(mut self, separator: impl Into<String>) -> Self {
        self.join_separator = separator.into();
        self
    }

    pub fn with_truncation(mut self, max_chars: Option<usize>) -> Self {
        self.stack_entry_truncation = max_chars;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.input_window == 0 {
            return Err(ConfigError::ZeroInputWindow);
        }
        if self.output_window == 0 || self.output_window > self.input_window {
            return Err(ConfigError::BadOutputWindow {
                input: self.input_window,
                output: self.output_window,
            });
        }
        Ok(())
    }

    /// Number of prediction steps for `segments` segments.
    pub fn step_count(&self, segments: usize) -> usize {
        segments.div_ceil(self.output_window)
    }
}
