//! Versioned policy files: task learners plus (optionally) trained advising
//! networks, with enough shape metadata to refuse incompatible loads.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::advising::AdvisingSnapshot;
use crate::envs::Env;
use crate::qlearn::Learner;
use crate::{Error, Result};

pub const POLICY_FORMAT_VERSION: u32 = 1;

/// On-disk container for a trained pair of policies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyFile {
    pub version: u32,
    pub domain: String,
    pub obs_space: usize,
    pub actions: usize,
    pub learners: [Learner; 2],
    pub advising: Option<AdvisingSnapshot>,
}

impl PolicyFile {
    pub fn new(
        domain: String,
        env: &Env,
        learners: [Learner; 2],
        advising: Option<AdvisingSnapshot>,
    ) -> Self {
        PolicyFile {
            version: POLICY_FORMAT_VERSION,
            domain,
            obs_space: env.obs_space(),
            actions: env.action_count(),
            learners,
            advising,
        }
    }

    /// Verifies the stored shapes fit an environment.
    pub fn check_compatible(&self, env: &Env) -> Result<()> {
        if self.obs_space != env.obs_space() || self.actions != env.action_count() {
            return Err(Error::PolicyFile(format!(
                "policy shapes ({} observations, {} actions) do not fit the target \
                 environment ({} observations, {} actions)",
                self.obs_space,
                self.actions,
                env.obs_space(),
                env.action_count()
            )));
        }
        for learner in &self.learners {
            if learner.action_count() != env.action_count() {
                return Err(Error::PolicyFile("learner action count mismatch".into()));
            }
        }
        Ok(())
    }
}

pub fn save_policies(path: &Path, file: &PolicyFile) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let json = serde_json::to_string_pretty(file)?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_policies(path: &Path) -> Result<PolicyFile> {
    let text = std::fs::read_to_string(path)?;
    // Peek the version before binding the full structure so old files give a
    // version message rather than a shape error.
    #[derive(Deserialize)]
    struct VersionOnly {
        version: u32,
    }
    let v: VersionOnly = serde_json::from_str(&text)
        .map_err(|e| Error::PolicyFile(format!("{}: {e}", path.display())))?;
    if v.version != POLICY_FORMAT_VERSION {
        return Err(Error::PolicyFile(format!(
            "{}: format version {} (this build reads {})",
            path.display(),
            v.version,
            POLICY_FORMAT_VERSION
        )));
    }
    serde_json::from_str(&text).map_err(|e| Error::PolicyFile(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::DomainId;
    use crate::qlearn::TabularQ;

    fn trained_pair(env: &Env) -> [Learner; 2] {
        let mut l = Learner::Tabular(TabularQ::new(env.action_count(), 0.1, 0.95, 0.0));
        l.update(0, 1, 1.0, 1, true);
        [l.clone(), l]
    }

    #[test]
    fn save_load_round_trip_preserves_q_values() {
        let env = Env::standard(DomainId::Repeated);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policies.json");
        let file = PolicyFile::new("repeated".into(), &env, trained_pair(&env), None);
        save_policies(&path, &file).unwrap();
        let back = load_policies(&path).unwrap();
        assert_eq!(back.version, POLICY_FORMAT_VERSION);
        assert_eq!(back.learners[0].q_values(0), file.learners[0].q_values(0));
        back.check_compatible(&env).unwrap();
    }

    #[test]
    fn version_mismatch_is_refused() {
        let env = Env::standard(DomainId::Repeated);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policies.json");
        let mut file = PolicyFile::new("repeated".into(), &env, trained_pair(&env), None);
        file.version = 999;
        save_policies(&path, &file).unwrap();
        let err = load_policies(&path).unwrap_err();
        assert!(matches!(err, Error::PolicyFile(_)));
        assert!(err.to_string().contains("version 999"));
    }

    #[test]
    fn cross_domain_shapes_are_refused() {
        let room = Env::standard(DomainId::Room);
        let hallway = Env::standard(DomainId::Hallway);
        let file = PolicyFile::new("room".into(), &room, trained_pair(&room), None);
        assert!(file.check_compatible(&hallway).is_err());
        file.check_compatible(&room).unwrap();
    }
}
