use std::fmt;
use std::str::FromStr;

use crate::encoder::FriendMode;
use crate::{Error, Result};

/// Which representation slots feed the prediction head.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    /// Session state and social state.
    #[default]
    Full,
    /// Session state only; the social slot is zero.
    SelfOnly,
    /// Social state only; the session slot is zero.
    SocialOnly,
    /// Friends described by their recent session alone.
    ShortOnly,
    /// Friends described by their user embedding alone.
    LongOnly,
}

impl Mode {
    pub fn friend_mode(self) -> FriendMode {
        match self {
            Mode::ShortOnly => FriendMode::ShortOnly,
            Mode::LongOnly => FriendMode::LongOnly,
            _ => FriendMode::Both,
        }
    }

    pub fn uses_graph(self) -> bool {
        self != Mode::SelfOnly
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Mode::Full),
            "self_only" => Ok(Mode::SelfOnly),
            "social_only" => Ok(Mode::SocialOnly),
            "short_only" => Ok(Mode::ShortOnly),
            "long_only" => Ok(Mode::LongOnly),
            other => Err(Error::Config(format!(
                "unknown mode {other:?} (expected full, self_only, social_only, short_only or long_only)"
            ))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Full => "full",
            Mode::SelfOnly => "self_only",
            Mode::SocialOnly => "social_only",
            Mode::ShortOnly => "short_only",
            Mode::LongOnly => "long_only",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub hidden: usize,
    pub embed: usize,
    /// Attention layers L.
    pub layers: usize,
    /// Friends sampled per node, one entry per layer, root outward.
    pub fanouts: Vec<usize>,
    pub dropout: f64,
    /// Sessions per minibatch.
    pub batch: usize,
    pub learning_rate: f64,
    pub decay: f64,
    pub decay_interval: u64,
    pub max_session_len: usize,
    pub mode: Mode,
    pub seed: u64,
    /// Epochs without a validation Recall@20 improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    /// Score with the input item embeddings instead of a separate table.
    pub tie_embeddings: bool,
    /// Condition evaluation only on friends' training sessions.
    pub strict_train_friends: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: 100,
            embed: 100,
            layers: 2,
            fanouts: vec![10, 15],
            dropout: 0.2,
            batch: 200,
            learning_rate: 0.002,
            decay: 0.98,
            decay_interval: 400,
            max_session_len: 20,
            mode: Mode::Full,
            seed: 0,
            patience: 5,
            max_epochs: 30,
            tie_embeddings: false,
            strict_train_friends: false,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "hidden",
    "embed",
    "layers",
    "fanouts",
    "dropout",
    "batch",
    "lr",
    "decay",
    "decay_interval",
    "max_session_len",
    "mode",
    "seed",
    "patience",
    "max_epochs",
    "tie_embeddings",
    "strict_train_friends",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

impl ModelConfig {
    /// Sets one option by its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "hidden" => self.hidden = parse(key, value)?,
            "embed" => self.embed = parse(key, value)?,
            "layers" => self.layers = parse(key, value)?,
            "fanouts" => {
                self.fanouts = value
                    .split(',')
                    .map(|v| parse(key, v.trim()))
                    .collect::<Result<_>>()?
            }
            "dropout" => self.dropout = parse(key, value)?,
            "batch" => self.batch = parse(key, value)?,
            "lr" => self.learning_rate = parse(key, value)?,
            "decay" => self.decay = parse(key, value)?,
            "decay_interval" => self.decay_interval = parse(key, value)?,
            "max_session_len" => self.max_session_len = parse(key, value)?,
            "mode" => self.mode = value.parse()?,
            "seed" => self.seed = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "max_epochs" => self.max_epochs = parse(key, value)?,
            "tie_embeddings" => self.tie_embeddings = parse(key, value)?,
            "strict_train_friends" => self.strict_train_friends = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines on top of `self`. Blank lines and text
    /// after `#` are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, found {line:?}", n + 1)))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let fanouts: Vec<String> = self.fanouts.iter().map(ToString::to_string).collect();
        format!(
            "hidden={}\nembed={}\nlayers={}\nfanouts={}\ndropout={}\nbatch={}\nlr={}\ndecay={}\n\
             decay_interval={}\nmax_session_len={}\nmode={}\nseed={}\npatience={}\nmax_epochs={}\n\
             tie_embeddings={}\nstrict_train_friends={}\n",
            self.hidden,
            self.embed,
            self.layers,
            fanouts.join(","),
            self.dropout,
            self.batch,
            self.learning_rate,
            self.decay,
            self.decay_interval,
            self.max_session_len,
            self.mode,
            self.seed,
            self.patience,
            self.max_epochs,
            self.tie_embeddings,
            self.strict_train_friends,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden", self.hidden),
            ("embed", self.embed),
            ("layers", self.layers),
            ("batch", self.batch),
            ("max_session_len", self.max_session_len),
            ("max_epochs", self.max_epochs),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.fanouts.len() != self.layers {
            return Err(Error::Config(format!(
                "{} fanouts given for {} layers",
                self.fanouts.len(),
                self.layers
            )));
        }
        if self.fanouts.contains(&0) {
            return Err(Error::Config("fanouts must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.learning_rate > 0.0 && self.decay > 0.0 && self.decay_interval > 0) {
            return Err(Error::Config("learning rate, decay and decay_interval must be positive".into()));
        }
        if self.tie_embeddings && self.embed != self.hidden {
            return Err(Error::Config("tie_embeddings requires embed == hidden".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ModelConfig::default();
        c.validate().unwrap();
        assert_eq!((c.hidden, c.embed, c.layers, c.batch), (100, 100, 2, 200));
        assert_eq!(c.fanouts, vec![10, 15]);
        assert_eq!(c.dropout, 0.2);
        assert_eq!(c.patience, 5);
    }

    #[test]
    fn text_roundtrip() {
        let mut c = ModelConfig::default();
        c.apply_text("# comment\nhidden = 8\nembed=8\nfanouts=2,3\nmode=self_only\n\n").unwrap();
        assert_eq!(c.hidden, 8);
        assert_eq!(c.fanouts, vec![2, 3]);
        assert_eq!(c.mode, Mode::SelfOnly);
        assert_eq!(ModelConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let mut c = ModelConfig::default();
        assert!(matches!(c.apply_text("hiden=3"), Err(Error::Config(_))));
        assert!(matches!(c.set("mode", "both"), Err(Error::Config(_))));
        assert!(c.apply_text("no equals sign").is_err());
    }

    #[test]
    fn fanouts_must_match_layers() {
        let mut c = ModelConfig::default();
        c.layers = 3;
        assert!(c.validate().is_err());
        c.fanouts = vec![10, 15, 5];
        c.validate().unwrap();
    }
}
