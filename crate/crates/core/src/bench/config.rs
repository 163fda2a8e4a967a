//! Flat `key = value` configuration.
//!
//! One setting per line, `#` starts a comment, nested blocks use dotted
//! prefixes (`egt.eta = 1.5`). Unknown and repeated keys are rejected.
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `algorithm` | `egt`, `astar`, `mc` or `qlearn` | `egt` |
//! | `seed` | master seed | `0` |
//! | `threads` | worker threads, `1` is the reproducible mode, `0` all cores | `1` |
//! | `map.file` | map text file; excludes the generator keys | |
//! | `map.size` | sets both `map.width` and `map.height` | |
//! | `map.width`, `map.height` | generated map dimensions | `20` |
//! | `map.density` | obstacle probability per cell | `0.2` |
//! | `map.starts` | start cell count | every reachable free cell |
//! | `map.goals` | goal cell count | one per 20 cells of the longer side |
//! | `map.seed` | generator seed | derived from `seed` |
//! | `world.agents` | agents per episode | `1` |
//! | `world.horizon` | steps per episode | `4 * max(width, height)` |
//! | `world.action_noise` | chance of a random permissible action | `0` |
//! | `reward.delta1/2/3` | step, blocked, goal rewards | `-1`, `-5`, `100` |
//! | `egt.eta/alpha/beta/nu/mu/epsilon` | learner constants | see `EgtParams` |
//! | `egt.episodes` | training episodes | `budget.episodes_per_cell * area` |
//! | `egt.reconstruct_interval` | episodes between policy rebuilds | `1000` |
//! | `egt.behavior_mode` | `iterative` or `faithful` | `iterative` |
//! | `learn.learning_rate`, `learn.discount` | tabular constants | `0.5`, `0.999` |
//! | `learn.explore_start/end` | ε-greedy schedule endpoints | `1.0`, `0.05` |
//! | `learn.explore_decay_episodes` | linear decay length | half the episodes |
//! | `learn.episodes` | training episodes | `budget.episodes_per_cell * area` |
//! | `learn.max_agent_steps` | agent-step cap | `budget.steps_per_cell * area` |
//! | `budget.episodes_per_cell` | episode schedule factor | `500` |
//! | `budget.steps_per_cell` | tabular agent-step cap factor, `0` disables | `20000` |
//! | `eval.episodes` | evaluation rollouts | `100` |
//! | `output.timings` | write wall-clock columns (`false` writes `NA`) | `true` |
//! | `sweep.values` | comma-separated axis values | per subcommand |
//! | `sweep.algorithms` | comma-separated algorithms | `egt,astar,mc,qlearn` |
//! | `sweep.reps` | repetitions per cell | `1` |
//! | `ess.p_new`, `ess.extra_fraction` | invasion probability and length | `0.1`, `0.1` |
//! | `ess.eval_episodes`, `ess.agreement`, `ess.tolerance` | verdict settings | `200`, `0.95`, `0.05` |
//! | `ess.invader` | `uniform` or `incumbent` | `uniform` |

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::baselines::{Exploration, LearnParams};
use crate::egt::{EgtParams, EssConfig, Invader};
use crate::error::{Error, Result};
use crate::gridworld::{GridMap, RewardConfig, WorldConfig};
use crate::seed::{self, stream};

use super::generate::{default_goal_count, MapSpec};

const KEYS: &[&str] = &[
    "algorithm",
    "seed",
    "threads",
    "map.file",
    "map.size",
    "map.width",
    "map.height",
    "map.density",
    "map.starts",
    "map.goals",
    "map.seed",
    "world.agents",
    "world.horizon",
    "world.action_noise",
    "reward.delta1",
    "reward.delta2",
    "reward.delta3",
    "egt.eta",
    "egt.alpha",
    "egt.beta",
    "egt.nu",
    "egt.mu",
    "egt.epsilon",
    "egt.episodes",
    "egt.reconstruct_interval",
    "egt.behavior_mode",
    "learn.learning_rate",
    "learn.discount",
    "learn.explore_start",
    "learn.explore_end",
    "learn.explore_decay_episodes",
    "learn.episodes",
    "learn.max_agent_steps",
    "budget.episodes_per_cell",
    "budget.steps_per_cell",
    "eval.episodes",
    "output.timings",
    "sweep.values",
    "sweep.algorithms",
    "sweep.reps",
    "ess.p_new",
    "ess.extra_fraction",
    "ess.eval_episodes",
    "ess.agreement",
    "ess.tolerance",
    "ess.invader",
];

/// Parsed key/value pairs, validated against the known key set.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<RawConfig> {
        let mut raw = RawConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(format!("line {}: expected key = value", n + 1)));
            };
            let key = key.trim();
            if raw.values.contains_key(key) {
                return Err(Error::config(format!("line {}: key {key:?} set twice", n + 1)));
            }
            raw.set(key, value.trim())?;
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> Result<RawConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        RawConfig::parse(&text)
    }

    /// Sets or replaces one key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::config(format!("unknown key {key:?}")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override {pair:?} is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::config(format!("{key}: cannot parse {v:?}"))),
        }
    }

    fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn get_bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.get_str(key) {
            None => Ok(default),
            Some("true" | "yes" | "1") => Ok(true),
            Some("false" | "no" | "0") => Ok(false),
            Some(v) => Err(Error::config(format!("{key}: expected true or false, got {v:?}"))),
        }
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some(v) = self.get_str(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::config(format!("{key}: cannot parse item {s:?}")))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    Astar,
    Egt,
    Mc,
    Qlearn,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Egt, Algorithm::Astar, Algorithm::Mc, Algorithm::Qlearn];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Astar => "astar",
            Algorithm::Egt => "egt",
            Algorithm::Mc => "mc",
            Algorithm::Qlearn => "qlearn",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "astar" => Ok(Algorithm::Astar),
            "egt" => Ok(Algorithm::Egt),
            "mc" => Ok(Algorithm::Mc),
            "qlearn" => Ok(Algorithm::Qlearn),
            _ => Err(Error::config(format!("unknown algorithm {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MapSource {
    File(PathBuf),
    Generated(MapSpec),
}

impl MapSource {
    pub fn load(&self) -> Result<GridMap> {
        match self {
            MapSource::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                GridMap::parse(&text)
            }
            MapSource::Generated(spec) => spec.generate(),
        }
    }
}

/// Training budget rules used when episode counts are not given directly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Budget {
    pub episodes_per_cell: usize,
    /// Tabular agent-step cap per map cell; 0 disables the cap.
    pub steps_per_cell: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            episodes_per_cell: 500,
            steps_per_cell: 20_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub map: MapSource,
    /// Generator seed; `None` derives it from `seed`.
    pub map_seed: Option<u64>,
    pub n_agents: usize,
    /// `None` uses the map-dependent default.
    pub horizon: Option<usize>,
    pub action_noise: f64,
    pub rewards: RewardConfig,
    /// Episode fields are overridden by `egt_episodes`.
    pub egt: EgtParams,
    pub egt_episodes: Option<usize>,
    pub learn: LearnParams,
    pub learn_episodes: Option<usize>,
    pub learn_decay: Option<usize>,
    pub learn_step_cap: Option<u64>,
    pub budget: Budget,
    pub eval_episodes: usize,
    pub seed: u64,
    pub threads: usize,
    pub timings: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            algorithm: Algorithm::Egt,
            map: MapSource::Generated(MapSpec::square(20, 0.2, 0)),
            map_seed: None,
            n_agents: 1,
            horizon: None,
            action_noise: 0.0,
            rewards: RewardConfig::default(),
            egt: EgtParams::default(),
            egt_episodes: None,
            learn: LearnParams::default(),
            learn_episodes: None,
            learn_decay: None,
            learn_step_cap: None,
            budget: Budget::default(),
            eval_episodes: 100,
            seed: 0,
            threads: 1,
            timings: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<ExperimentConfig> {
        let d = ExperimentConfig::default();
        let seed = raw.get_or("seed", d.seed)?;
        let map = if let Some(path) = raw.get_str("map.file") {
            for k in ["map.size", "map.width", "map.height", "map.density", "map.starts", "map.goals", "map.seed"] {
                if raw.contains(k) {
                    return Err(Error::config(format!("{k} cannot be combined with map.file")));
                }
            }
            MapSource::File(PathBuf::from(path))
        } else {
            let size: Option<usize> = raw.get("map.size")?;
            let width = raw.get("map.width")?.or(size).unwrap_or(20);
            let height = raw.get("map.height")?.or(size).unwrap_or(20);
            MapSource::Generated(MapSpec {
                width,
                height,
                density: raw.get_or("map.density", 0.2)?,
                n_starts: raw.get("map.starts")?,
                n_goals: raw.get("map.goals")?,
                seed: 0,
            })
        };
        let de = d.egt;
        let egt = EgtParams {
            eta: raw.get_or("egt.eta", de.eta)?,
            alpha: raw.get_or("egt.alpha", de.alpha)?,
            beta: raw.get_or("egt.beta", de.beta)?,
            nu: raw.get_or("egt.nu", de.nu)?,
            mu: raw.get_or("egt.mu", de.mu)?,
            epsilon: raw.get_or("egt.epsilon", de.epsilon)?,
            episodes: de.episodes,
            reconstruct_interval: raw.get_or("egt.reconstruct_interval", de.reconstruct_interval)?,
            behavior_mode: raw.get_or("egt.behavior_mode", de.behavior_mode)?,
        };
        let dl = d.learn;
        let learn = LearnParams {
            learning_rate: raw.get_or("learn.learning_rate", dl.learning_rate)?,
            discount: raw.get_or("learn.discount", dl.discount)?,
            explore: Exploration {
                start: raw.get_or("learn.explore_start", dl.explore.start)?,
                end: raw.get_or("learn.explore_end", dl.explore.end)?,
                decay_episodes: dl.explore.decay_episodes,
            },
            episodes: dl.episodes,
            max_agent_steps: None,
        };
        let cfg = ExperimentConfig {
            algorithm: raw.get_or("algorithm", d.algorithm)?,
            map,
            map_seed: raw.get("map.seed")?,
            n_agents: raw.get_or("world.agents", d.n_agents)?,
            horizon: raw.get("world.horizon")?,
            action_noise: raw.get_or("world.action_noise", d.action_noise)?,
            rewards: RewardConfig {
                delta1: raw.get_or("reward.delta1", d.rewards.delta1)?,
                delta2: raw.get_or("reward.delta2", d.rewards.delta2)?,
                delta3: raw.get_or("reward.delta3", d.rewards.delta3)?,
            },
            egt,
            egt_episodes: raw.get("egt.episodes")?,
            learn,
            learn_episodes: raw.get("learn.episodes")?,
            learn_decay: raw.get("learn.explore_decay_episodes")?,
            learn_step_cap: raw.get("learn.max_agent_steps")?,
            budget: Budget {
                episodes_per_cell: raw.get_or("budget.episodes_per_cell", d.budget.episodes_per_cell)?,
                steps_per_cell: raw.get_or("budget.steps_per_cell", d.budget.steps_per_cell)?,
            },
            eval_episodes: raw.get_or("eval.episodes", d.eval_episodes)?,
            seed,
            threads: raw.get_or("threads", d.threads)?,
            timings: raw.get_bool("output.timings", d.timings)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let MapSource::Generated(spec) = &self.map {
            if !(0.0..1.0).contains(&spec.density) {
                return Err(Error::config("map.density must lie in [0, 1)"));
            }
            if spec.width == 0 || spec.height == 0 {
                return Err(Error::config("map dimensions must be positive"));
            }
        }
        if let MapSource::File(path) = &self.map {
            if !path.exists() {
                return Err(Error::Io {
                    path: path.display().to_string(),
                    message: "file not found".into(),
                });
            }
        }
        if self.n_agents == 0 {
            return Err(Error::config("world.agents must be positive"));
        }
        if self.horizon == Some(0) {
            return Err(Error::config("world.horizon must be positive"));
        }
        if !(0.0..=1.0).contains(&self.action_noise) {
            return Err(Error::config("world.action_noise must lie in [0, 1]"));
        }
        self.rewards.validate()?;
        self.egt.validate()?;
        let mut learn = self.learn;
        learn.explore.decay_episodes = 0;
        learn.validate()?;
        if self.budget.episodes_per_cell == 0 {
            return Err(Error::config("budget.episodes_per_cell must be positive"));
        }
        Ok(())
    }

    /// Loads or generates the map.
    pub fn load_map(&self) -> Result<GridMap> {
        match &self.map {
            MapSource::Generated(spec) => MapSpec {
                seed: self.map_seed.unwrap_or_else(|| seed::derive(self.seed, &[stream::MAP])),
                ..*spec
            }
            .generate(),
            file => file.load(),
        }
    }

    /// World settings for `map`.
    pub fn world(&self, map: &GridMap) -> WorldConfig {
        WorldConfig {
            n_agents: self.n_agents,
            horizon: self.horizon.unwrap_or_else(|| WorldConfig::default_horizon(map)),
            action_noise: self.action_noise,
        }
    }

    /// Learner constants with the episode budget resolved for `map`.
    pub fn egt_params(&self, map: &GridMap) -> EgtParams {
        EgtParams {
            episodes: self.egt_episodes.unwrap_or(self.budget.episodes_per_cell * map.area()),
            ..self.egt
        }
    }

    pub fn learn_params(&self, map: &GridMap) -> LearnParams {
        let episodes = self
            .learn_episodes
            .unwrap_or(self.budget.episodes_per_cell * map.area());
        let cap = self.learn_step_cap.or_else(|| {
            (self.budget.steps_per_cell > 0).then(|| self.budget.steps_per_cell * map.area() as u64)
        });
        LearnParams {
            explore: Exploration {
                decay_episodes: self.learn_decay.unwrap_or(episodes / 2),
                ..self.learn.explore
            },
            episodes,
            max_agent_steps: cap,
            ..self.learn
        }
    }

    /// Goal count used when the map is generated with defaults.
    pub fn goal_count(&self) -> Option<usize> {
        match &self.map {
            MapSource::Generated(spec) => Some(spec.n_goals.unwrap_or(default_goal_count(spec.width, spec.height))),
            MapSource::File(_) => None,
        }
    }
}

impl FromStr for Invader {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Invader::Uniform),
            "incumbent" => Ok(Invader::Incumbent),
            _ => Err(Error::config(format!("unknown invader {s:?}"))),
        }
    }
}

pub fn ess_config(raw: &RawConfig) -> Result<EssConfig> {
    let d = EssConfig::default();
    Ok(EssConfig {
        p_new: raw.get_or("ess.p_new", d.p_new)?,
        extra_episode_fraction: raw.get_or("ess.extra_fraction", d.extra_episode_fraction)?,
        eval_episodes: raw.get_or("ess.eval_episodes", d.eval_episodes)?,
        agreement_threshold: raw.get_or("ess.agreement", d.agreement_threshold)?,
        fitness_tolerance: raw.get_or("ess.tolerance", d.fitness_tolerance)?,
        invader: raw.get_or("ess.invader", d.invader)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blocks() {
        let raw = RawConfig::parse("# demo\nalgorithm = mc\nmap.size = 12 # square\negt.eta=1.2\n\n").unwrap();
        let cfg = ExperimentConfig::from_raw(&raw).unwrap();
        assert_eq!(cfg.algorithm, Algorithm::Mc);
        assert_eq!(cfg.egt.eta, 1.2);
        match cfg.map {
            MapSource::Generated(spec) => assert_eq!((spec.width, spec.height), (12, 12)),
            MapSource::File(_) => panic!("expected generated map"),
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RawConfig::parse("nonsense\n").is_err());
        assert!(RawConfig::parse("egt.etaa = 1\n").is_err());
        assert!(RawConfig::parse("seed = 1\nseed = 2\n").is_err());
        let raw = RawConfig::parse("map.density = 1.0\n").unwrap();
        assert!(ExperimentConfig::from_raw(&raw).is_err());
        let raw = RawConfig::parse("egt.eta = 3\n").unwrap();
        assert!(ExperimentConfig::from_raw(&raw).is_err());
        let raw = RawConfig::parse("map.file = /definitely/not/here.map\n").unwrap();
        assert!(matches!(ExperimentConfig::from_raw(&raw), Err(Error::Io { .. })));
        let raw = RawConfig::parse("algorithm = ppo\n").unwrap();
        assert!(ExperimentConfig::from_raw(&raw).is_err());
    }

    #[test]
    fn budgets_scale_with_area() {
        let cfg = ExperimentConfig::default();
        let map = GridMap::parse("S..\n..G\n").unwrap();
        assert_eq!(cfg.egt_params(&map).episodes, 500 * 6);
        let learn = cfg.learn_params(&map);
        assert_eq!(learn.episodes, 3000);
        assert_eq!(learn.explore.decay_episodes, 1500);
        assert_eq!(learn.max_agent_steps, Some(20_000 * 6));
        assert_eq!(cfg.world(&map).horizon, 12);
    }

    #[test]
    fn overrides_replace_values() {
        let mut raw = RawConfig::parse("seed = 1\n").unwrap();
        raw.set_pair("seed=5").unwrap();
        assert_eq!(raw.get::<u64>("seed").unwrap(), Some(5));
        assert!(raw.set_pair("bogus").is_err());
    }
}
