// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use encsearch::synth::{fixture, random_access, Fixture, SynthConfig};
use encsearch_cli::config::Config;
use encsearch_cli::run_args;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub struct Env {
    pub dir: tempfile::TempDir,
    pub fixture: Fixture,
}

impl Env {
    pub fn root(&self) -> PathBuf {
        self.dir.path().join("ws")
    }

    pub fn corpus(&self) -> PathBuf {
        self.dir.path().join("corpus")
    }

    pub fn onto(&self) -> PathBuf {
        self.dir.path().join("pages")
    }

    pub fn users(&self) -> PathBuf {
        self.dir.path().join("users.tsv")
    }

    /// Runs a command against this workspace and returns (exit code, stdout).
    pub fn run(&self, args: &[&str]) -> anyhow::Result<(i32, String)> {
        let root = self.root();
        let mut argv = vec!["encsearch", "--workspace", root.to_str().unwrap()];
        argv.extend_from_slice(args);
        let mut out = Vec::new();
        let code = run_args(argv, &mut out)?;
        Ok((code, String::from_utf8(out).unwrap()))
    }

    pub fn ok(&self, args: &[&str]) -> String {
        let (code, out) = self.run(args).unwrap_or_else(|e| panic!("{args:?}: {e:#}"));
        assert_eq!(code, 0, "{args:?}: {out}");
        out
    }
}

/// Small parameters so that key generation and tables stay fast.
pub fn test_config() -> Config {
    Config { he_prime_bits: 64, block_size: 64, epsilon_max: 0.0, ..Config::default() }
}

fn write_docs(dir: &Path, docs: &[encsearch::textindex::Document]) {
    fs::create_dir_all(dir).unwrap();
    for d in docs {
        fs::write(dir.join(format!("{}.txt", d.doc_id)), &d.text).unwrap();
    }
}

/// A temporary directory holding the synthetic corpus, concept pages, a
/// five-user access file and an initialized workspace with keys.
pub fn setup(cfg: &SynthConfig, config: &Config) -> Env {
    let dir = tempfile::tempdir().unwrap();
    let fixture = fixture(cfg);
    let env = Env { dir, fixture };
    write_docs(&env.corpus(), &env.fixture.docs);
    write_docs(&env.onto(), &env.fixture.pages);
    let ids: Vec<String> = env.fixture.docs.iter().map(|d| d.doc_id.clone()).collect();
    let access = random_access(&ids, 5, 0.5, &mut ChaCha20Rng::seed_from_u64(cfg.seed));
    let mut tsv = String::new();
    for (user, docs) in &access {
        for d in docs {
            tsv.push_str(&format!("{user}\t{d}\n"));
        }
    }
    fs::write(env.users(), tsv).unwrap();

    let config_path = env.dir.path().join("config.toml");
    fs::write(&config_path, config.to_toml().unwrap()).unwrap();
    env.ok(&["init", "--config", config_path.to_str().unwrap()]);
    env.ok(&["keygen"]);
    env
}

pub fn build(env: &Env, scheme: &str) -> String {
    let (corpus, onto, users) = (env.corpus(), env.onto(), env.users());
    env.ok(&[
        "build",
        "--scheme",
        scheme,
        "--corpus",
        corpus.to_str().unwrap(),
        "--onto",
        onto.to_str().unwrap(),
        "--users",
        users.to_str().unwrap(),
    ])
}

/// Doc id column of a printed ranking.
pub fn doc_column(ranking: &str) -> Vec<String> {
    ranking.lines().skip(1).map(|l| l.split('\t').nth(1).unwrap().to_string()).collect()
}

/// Doc id and score columns of a printed ranking.
pub fn rows(ranking: &str) -> Vec<Vec<String>> {
    ranking.lines().skip(1).map(|l| l.split('\t').skip(1).map(str::to_string).collect()).collect()
}
