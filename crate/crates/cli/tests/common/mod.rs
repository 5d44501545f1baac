#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use scenewatch_core::scene::{Scene, SceneRole};
use scenewatch_core::workspace::{PairDef, Workspace, WorkspaceConfig};
use scenewatch_core::RgbImage;

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_scenewatch"));
    c.env_remove("SCENEWATCH_WORKSPACE");
    c
}

pub fn run(ws: &Path, args: &[&str]) -> Output {
    bin().arg("--workspace").arg(ws).args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn synth(dir: &Path, args: &[&str]) {
    let o = bin().args(["synth", "--out"]).arg(dir).args(args).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
}

/// Two bright squares on black, registered as scene `fx` paired with itself.
pub fn fixture_workspace(dir: &Path) -> PathBuf {
    let mut img = RgbImage::filled(64, 64, [0, 0, 0]);
    for (x0, y0) in [(8usize, 8usize), (40, 30)] {
        for y in y0..y0 + 10 {
            for x in x0..x0 + 10 {
                img.set_pixel(x, y, [230, 230, 230]);
            }
        }
    }
    std::fs::create_dir_all(dir.join("scenes")).unwrap();
    img.save_png(&dir.join("scenes/fx.png")).unwrap();
    let scene = |id: &str, role| Scene {
        id: id.into(),
        image_path: "scenes/fx.png".into(),
        captured_at: chrono_epoch(),
        role,
    };
    let config = WorkspaceConfig {
        scenes: vec![scene("fx", SceneRole::Reference), scene("fx2", SceneRole::Query)],
        pairs: vec![PairDef { id: "same".into(), reference: "fx".into(), query: "fx2".into() }],
        ..WorkspaceConfig::default()
    };
    Workspace::create(dir, config).unwrap();
    dir.to_path_buf()
}

fn chrono_epoch() -> scenewatch_core::scene::Timestamp {
    scenewatch_core::scene::Timestamp::UNIX_EPOCH
}
