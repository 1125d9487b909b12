#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use expressdyn::basis::write_basis_csv;
use expressdyn::config::{PieceSpec, ProjectConfig};
use expressdyn::eval::LooPiece;
use expressdyn::loudness::{write_target_csv, TargetCurve};
use expressdyn::models::{ModelKind, TrainConfig};
use expressdyn::score::write_dump;
use expressdyn::synth::FfScenario;

pub const MUSICXML: &str = r#"<?xml version="1.0"?>
<score-partwise version="3.1">
  <work><work-title>Two bars</work-title></work>
  <part-list>
    <score-part id="P1"><part-name>Oboe</part-name></score-part>
  </part-list>
  <part id="P1">
    <measure number="1">
      <attributes><divisions>2</divisions><time><beats>4</beats><beat-type>4</beat-type></time></attributes>
      <direction><direction-type><dynamics><p/></dynamics></direction-type></direction>
      <note><pitch><step>C</step><octave>5</octave></pitch><duration>2</duration><voice>1</voice></note>
      <note><pitch><step>D</step><octave>5</octave></pitch><duration>2</duration><voice>1</voice></note>
      <note><pitch><step>E</step><octave>5</octave></pitch><duration>4</duration><voice>1</voice></note>
    </measure>
    <measure number="2">
      <direction><direction-type><dynamics><f/></dynamics></direction-type></direction>
      <note><pitch><step>F</step><octave>5</octave></pitch><duration>4</duration><voice>1</voice></note>
      <note><pitch><step>G</step><octave>5</octave></pitch><duration>4</duration><voice>1</voice></note>
    </measure>
  </part>
</score-partwise>
"#;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_expressdyn"))
}

pub fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).env_remove("RUST_LOG").output().expect("binary runs")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Writes `<id>.basis.csv` and `<id>.target.csv` for a piece, returning its descriptor.
pub fn write_piece(dir: &Path, id: &str, piece: &LooPiece) -> PieceSpec {
    write_pair(dir, id, piece, &piece.target)
}

fn write_pair(dir: &Path, id: &str, piece: &LooPiece, target: &TargetCurve) -> PieceSpec {
    let basis = format!("{id}.basis.csv");
    let tgt = format!("{id}.target.csv");
    write_basis_csv(&piece.matrix, &dir.join(&basis)).unwrap();
    write_target_csv(target, &dir.join(&tgt)).unwrap();
    PieceSpec { id: id.to_string(), basis: Some(basis.into()), target: Some(tgt.into()), ..Default::default() }
}

/// A project over `pieces`; returns the path of `project.toml`.
pub fn write_project(dir: &Path, pieces: &[LooPiece], models: &[ModelKind], train: TrainConfig, validation_count: usize) -> PathBuf {
    let mut cfg = ProjectConfig::default();
    cfg.models = models.to_vec();
    cfg.model = models[0];
    cfg.validation_count = validation_count;
    cfg.train = train;
    cfg.pieces = pieces.iter().map(|p| write_piece(dir, &p.id, p)).collect();
    let path = dir.join("project.toml");
    cfg.save(&path).unwrap();
    path
}

pub struct FfFiles {
    pub project: PathBuf,
    pub score: PathBuf,
    pub louder: PathBuf,
    pub softer: PathBuf,
}

/// The ff scenario on disk: corpus project, passage score dump and one
/// piece descriptor per rendition.
pub fn write_ff(dir: &Path, scenario: &FfScenario, model: ModelKind) -> FfFiles {
    let train = TrainConfig { hidden: 8, ..TrainConfig::default() };
    let project = write_project(dir, &scenario.corpus, &[model], train, 0);
    let score = dir.join("passage.txt");
    fs::write(&score, write_dump(&scenario.score)).unwrap();
    let passage = LooPiece { id: "passage".into(), matrix: scenario.matrix.clone(), target: scenario.louder.clone() };
    let descriptor = |name: &str, target: &TargetCurve| {
        let spec = write_pair(dir, name, &passage, target);
        let path = dir.join(format!("{name}.toml"));
        fs::write(&path, spec.to_toml().unwrap()).unwrap();
        path
    };
    let louder = descriptor("louder", &scenario.louder);
    let softer = descriptor("softer", &scenario.softer);
    FfFiles { project, score, louder, softer }
}
