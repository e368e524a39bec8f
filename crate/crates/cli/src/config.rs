//! Line-oriented `key = value` run configuration.
//!
//! Precedence, lowest first: built-in defaults, `--config` file, command
//! flags, `--set key=value` in order given. The resolved table is written
//! beside every run's outputs and can be fed back through `--config`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{Context, Result};
use offroad_core::env::{EnvConfig, EnvTemplate};
use offroad_core::world::ObstacleDensities;
use offroad_core::{scenes, CameraModel, CemConfig, Preset, RandomizationConfig, RewardWeights, WorldSpec};

pub const RESOLVED_FILE: &str = "config.resolved.txt";

/// Bad flags, keys or values. Exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Every accepted key with its default. `preset` defers to the preset's own
/// value, `auto` to a derived one.
const KEYS: &[(&str, &str)] = &[
    ("seed", "0"),
    // worlds | empty-meadow | rock | rock-mix
    ("scene", "worlds"),
    ("presets", "meadow,landscape,canyon"),
    ("worlds_per_preset", "1"),
    ("world.seed", "0"),
    ("world.extent", "100"),
    ("world.grid_resolution", "0.5"),
    ("world.tree_density", "preset"),
    ("world.rock_density", "preset"),
    ("world.log_density", "preset"),
    ("world.amplitude", "preset"),
    ("env.horizon", "5"),
    ("env.goal_range", "20"),
    ("env.goal_radius", "2"),
    ("env.max_decisions", "auto"),
    ("env.substeps", "2"),
    ("env.dt", "0.05"),
    ("env.initial_speed", "2"),
    ("env.collision_terminal", "false"),
    ("env.resolution", "32"),
    ("rollout.heading_step", "0.1"),
    ("reward.goal", "1"),
    ("reward.upright", "1"),
    ("reward.steer", "0.1"),
    ("reward.collision", "1"),
    ("cem.population", "32"),
    ("cem.elite_frac", "0.25"),
    ("cem.iterations", "30"),
    ("cem.init_std", "1"),
    ("cem.min_std", "0.05"),
    ("cem.episodes_per_candidate", "8"),
    ("cem.fixed_eval_seeds", "true"),
    ("cem.hidden", "8"),
    ("cem.init_accel_bias", "0"),
    ("cem.threads", "0"),
    ("rand.color", "true"),
    ("rand.lighting", "true"),
    ("rand.texture", "true"),
    ("rand.geometry", "true"),
    ("rand.hue_jitter", "0.08"),
    ("rand.brightness_jitter", "0.3"),
    ("rand.light_direction_jitter", "0.5"),
    ("rand.light_color_jitter", "0.25"),
    ("rand.texture_noise", "0.2"),
    ("rand.fov_jitter", "0.1"),
    ("rand.position_jitter", "0.2"),
    ("rand.rotation_jitter", "0.05"),
    ("pairs.count", "2000"),
    ("pairs.every", "2"),
    ("pairs.resolution", "64"),
    ("offline.logs", "80"),
    ("offline.horizon", "3"),
    ("offline.stride", "3"),
    ("offline.max_records", "200"),
    ("offline.min_goal_distance", "1"),
    // classmap | rgb
    ("offline.modality", "classmap"),
    ("eval.episodes", "100"),
    ("eval.seeds", "5"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { values: KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect() }
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        match self.values.get_mut(key) {
            Some(v) => {
                *v = value.trim().to_string();
                Ok(())
            }
            None => Err(usage(format!("unknown config key '{key}'"))),
        }
    }

    /// `key=value`, as given to `--set`.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair.split_once('=').ok_or_else(|| usage(format!("expected KEY=VALUE, got '{pair}'")))?;
        self.set(k, v)
    }

    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.set_pair(line)
                .map_err(|e| usage(format!("{}:{}: {e}", path.display(), i + 1)))?;
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("undeclared key {key}"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        let v = self.raw(key);
        v.parse().map_err(|e| usage(format!("{key} = '{v}': {e}")))
    }

    /// `None` for the `preset` / `auto` placeholders.
    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.raw(key) {
            "preset" | "auto" => Ok(None),
            _ => self.get(key).map(Some),
        }
    }

    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn write_resolved(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let p = dir.join(RESOLVED_FILE);
        std::fs::write(&p, self.to_text()).with_context(|| format!("writing {}", p.display()))
    }

    pub fn seed(&self) -> Result<u64> {
        self.get("seed")
    }

    pub fn presets(&self) -> Result<Vec<Preset>> {
        let list: Vec<Preset> = self
            .raw("presets")
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| Preset::parse(s).map_err(|e| usage(e.to_string())))
            .collect::<Result<_>>()?;
        if list.is_empty() {
            return Err(usage("presets must name at least one preset"));
        }
        Ok(list)
    }

    pub fn world_spec(&self, preset: Preset, seed: u64) -> Result<WorldSpec> {
        let mut spec = WorldSpec::new(preset, seed);
        spec.extent = self.get("world.extent")?;
        spec.grid_resolution = self.get("world.grid_resolution")?;
        let d = spec.densities;
        spec.densities = ObstacleDensities {
            trees: self.get_opt("world.tree_density")?.unwrap_or(d.trees),
            rocks: self.get_opt("world.rock_density")?.unwrap_or(d.rocks),
            logs: self.get_opt("world.log_density")?.unwrap_or(d.logs),
        };
        spec.terrain_amplitude = self.get_opt("world.amplitude")?;
        spec.validate().map_err(|e| usage(e.to_string()))?;
        Ok(spec)
    }

    /// One spec per preset and index, world seeds counting up from `world.seed`.
    pub fn world_specs(&self) -> Result<Vec<WorldSpec>> {
        let base: u64 = self.get("world.seed")?;
        let per: u64 = self.get("worlds_per_preset")?;
        if per == 0 {
            return Err(usage("worlds_per_preset must be >= 1"));
        }
        let mut out = Vec::new();
        for p in self.presets()? {
            for i in 0..per {
                out.push(self.world_spec(p, base + i)?);
            }
        }
        Ok(out)
    }

    pub fn env_config(&self) -> Result<EnvConfig> {
        let horizon: usize = self.get("env.horizon")?;
        let mut cfg = EnvConfig::with_horizon(horizon);
        let ep = &mut cfg.episode;
        ep.goal_range = self.get("env.goal_range")?;
        ep.goal_radius = self.get("env.goal_radius")?;
        ep.substeps = self.get("env.substeps")?;
        ep.dt = self.get("env.dt")?;
        ep.initial_speed = self.get("env.initial_speed")?;
        ep.collision_terminal = self.get("env.collision_terminal")?;
        match self.get_opt::<usize>("env.max_decisions")? {
            Some(n) => ep.max_decisions = n,
            None => cfg.episode = cfg.episode.clone().for_horizon(horizon),
        }
        cfg.camera = CameraModel::with_resolution(self.get("env.resolution")?);
        cfg.rollout.heading_step = self.get("rollout.heading_step")?;
        cfg.weights = RewardWeights {
            goal: self.get("reward.goal")?,
            upright: self.get("reward.upright")?,
            steer: self.get("reward.steer")?,
            collision: self.get("reward.collision")?,
        };
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        Ok(cfg)
    }

    pub fn template(&self) -> Result<EnvTemplate> {
        let cfg = self.env_config()?;
        let t = match self.raw("scene") {
            "worlds" => EnvTemplate::new(cfg, &self.world_specs()?),
            "empty-meadow" => scenes::meadow_template(cfg),
            "rock" => scenes::rock_eval_template(cfg),
            "rock-mix" => scenes::rock_training_template(cfg, 3),
            other => return Err(usage(format!("unknown scene '{other}' (worlds, empty-meadow, rock, rock-mix)"))),
        };
        Ok(t?)
    }

    pub fn cem(&self) -> Result<CemConfig> {
        let c = CemConfig {
            population: self.get("cem.population")?,
            elite_frac: self.get("cem.elite_frac")?,
            iterations: self.get("cem.iterations")?,
            init_std: self.get("cem.init_std")?,
            min_std: self.get("cem.min_std")?,
            episodes_per_candidate: self.get("cem.episodes_per_candidate")?,
            fixed_eval_seeds: self.get("cem.fixed_eval_seeds")?,
            hidden: self.get("cem.hidden")?,
            init_accel_bias: self.get("cem.init_accel_bias")?,
            threads: self.get("cem.threads")?,
        };
        c.validate().map_err(|e| usage(e.to_string()))?;
        Ok(c)
    }

    pub fn randomization(&self) -> Result<RandomizationConfig> {
        let r = RandomizationConfig {
            color: self.get("rand.color")?,
            lighting: self.get("rand.lighting")?,
            texture: self.get("rand.texture")?,
            geometry: self.get("rand.geometry")?,
            hue_jitter: self.get("rand.hue_jitter")?,
            brightness_jitter: self.get("rand.brightness_jitter")?,
            light_direction_jitter: self.get("rand.light_direction_jitter")?,
            light_color_jitter: self.get("rand.light_color_jitter")?,
            texture_noise: self.get("rand.texture_noise")?,
            fov_jitter: self.get("rand.fov_jitter")?,
            position_jitter: self.get("rand.position_jitter")?,
            rotation_jitter: self.get("rand.rotation_jitter")?,
            ..Default::default()
        };
        r.validate().map_err(|e| usage(e.to_string()))?;
        Ok(r)
    }
}
