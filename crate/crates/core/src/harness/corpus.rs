//! Game logs, corpus statistics, spam detection and ingestion of the public
//! GuessWhat?! corpus format.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::game::{render_question, Answer, GameRecord};

/// The file formats `compute_corpus_stats` reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    /// JSON lines of [`GameRecord`], as written by the simulator and the
    /// play service.
    GameLog,
    /// GuessWhat?! games, either JSON lines or one JSON array.
    GuesswhatJson,
}

impl std::str::FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "game-log" | "jsonl" => Ok(CorpusFormat::GameLog),
            "guesswhat-json" => Ok(CorpusFormat::GuesswhatJson),
            _ => Err(Error::InvalidConfig(format!(
                "unknown corpus format {s:?}; expected game-log or guesswhat-json"
            ))),
        }
    }
}

/// The part of a game that statistics need. Structured logs and external
/// corpora both reduce to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatRecord {
    pub game_id: String,
    /// Image id for external games, a digest of the objects for logs.
    pub scene_key: String,
    pub goal_key: String,
    pub questions: Vec<String>,
    pub answers: Vec<Answer>,
    pub success: bool,
    /// Free text questions: words are counted instead of distinct questions.
    pub natural_language: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnswerDistribution {
    pub yes: f64,
    pub no: f64,
    pub na: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_games: usize,
    pub n_unique_scenes: usize,
    pub n_unique_goal_objects: usize,
    /// Approximate: lower-cased words split on whitespace and punctuation.
    /// Only for natural-language corpora.
    pub n_unique_words: Option<usize>,
    /// Only for structured logs.
    pub n_unique_questions: Option<usize>,
    pub n_questions: usize,
    pub answer_dist: AnswerDistribution,
    /// Number of games by dialogue length.
    pub question_count_histogram: BTreeMap<usize, usize>,
    pub spam_fraction: f64,
    pub object_success_rate: f64,
}

/// True iff every answer is the same. A single answer counts as spam.
pub fn detect_spam(answers: &[Answer]) -> Result<bool> {
    match answers.split_first() {
        None => Err(Error::InvalidRecord("dialogue has no turns".into())),
        Some((first, rest)) => Ok(rest.iter().all(|a| a == first)),
    }
}

pub fn detect_spam_record(record: &GameRecord) -> Result<bool> {
    detect_spam(&record.answers().collect::<Vec<_>>())
}

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| c.is_whitespace() || c.is_ascii_punctuation())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

/// Aggregate statistics. Every game needs at least one turn.
pub fn corpus_stats(records: &[StatRecord]) -> Result<CorpusStats> {
    if records.is_empty() {
        return Err(Error::InsufficientData("corpus has no games".into()));
    }
    let mut scenes = BTreeSet::new();
    let mut goals = BTreeSet::new();
    let mut vocabulary = BTreeSet::new();
    let mut questions = BTreeSet::new();
    let mut counts = [0usize; 3];
    let mut histogram = BTreeMap::new();
    let (mut spam, mut success) = (0usize, 0usize);
    let natural = records.iter().any(|r| r.natural_language);
    for r in records {
        let is_spam = detect_spam(&r.answers).map_err(|e| Error::Schema {
            game_id: r.game_id.clone(),
            message: e.to_string(),
        })?;
        spam += usize::from(is_spam);
        success += usize::from(r.success);
        scenes.insert(r.scene_key.as_str());
        goals.insert((r.scene_key.as_str(), r.goal_key.as_str()));
        for a in &r.answers {
            counts[a.index()] += 1;
        }
        *histogram.entry(r.answers.len()).or_insert(0) += 1;
        for q in &r.questions {
            if natural {
                vocabulary.extend(words(q));
            } else {
                questions.insert(q.as_str());
            }
        }
    }
    let n_questions: usize = counts.iter().sum();
    let frac = |c: usize| c as f64 / n_questions as f64;
    let n = records.len() as f64;
    Ok(CorpusStats {
        n_games: records.len(),
        n_unique_scenes: scenes.len(),
        n_unique_goal_objects: goals.len(),
        n_unique_words: natural.then_some(vocabulary.len()),
        n_unique_questions: (!natural).then_some(questions.len()),
        n_questions,
        answer_dist: AnswerDistribution {
            yes: frac(counts[Answer::Yes.index()]),
            no: frac(counts[Answer::No.index()]),
            na: frac(counts[Answer::Na.index()]),
        },
        question_count_histogram: histogram,
        spam_fraction: spam as f64 / n,
        object_success_rate: success as f64 / n,
    })
}

/// Digest of a scene's objects, used to count distinct scenes in logs.
fn scene_digest(record: &GameRecord) -> Result<String> {
    use sha2::{Digest, Sha256};
    let bytes = serde_json::to_vec(&record.scene.objects)?;
    Ok(hex::encode(&Sha256::digest(&bytes)[..12]))
}

pub fn stat_record(index: usize, record: &GameRecord) -> Result<StatRecord> {
    let scene_key = scene_digest(record)?;
    Ok(StatRecord {
        game_id: format!("{index}"),
        goal_key: record.scene.goal.to_string(),
        scene_key,
        questions: record.turns.iter().map(|t| render_question(&t.question)).collect(),
        answers: record.answers().collect(),
        success: record.object_correct() == Some(true),
        natural_language: false,
    })
}

/// Write records as JSON lines.
pub fn write_game_log<W: Write>(records: &[GameRecord], mut out: W) -> Result<()> {
    for r in records {
        writeln!(out, "{}", r.to_json_line()?)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_game_log_file(path: &Path, records: &[GameRecord]) -> Result<()> {
    write_game_log(records, std::io::BufWriter::new(File::create(path)?))
}

/// Read JSON lines of game records. Blank lines are skipped; an input with
/// no records is an error.
pub fn read_game_log<R: Read>(input: R) -> Result<Vec<GameRecord>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: GameRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        record.scene.validate().map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    if out.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no games in input".into(),
        });
    }
    Ok(out)
}

/// One game of the public corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalGame {
    pub id: String,
    pub image_id: String,
    pub object_id: String,
    pub status: String,
    pub questions: Vec<String>,
    /// Verbatim answer strings.
    pub answers: Vec<String>,
}

impl ExternalGame {
    pub fn to_stat_record(&self) -> Result<StatRecord> {
        let answers = self
            .answers
            .iter()
            .map(|a| {
                parse_external_answer(a).ok_or_else(|| Error::Schema {
                    game_id: self.id.clone(),
                    message: format!("unrecognised answer {a:?}"),
                })
            })
            .collect::<Result<_>>()?;
        Ok(StatRecord {
            game_id: self.id.clone(),
            scene_key: self.image_id.clone(),
            goal_key: self.object_id.clone(),
            questions: self.questions.clone(),
            answers,
            success: self.status == "success",
            natural_language: true,
        })
    }
}

/// "Yes", "No", "N/A" in any case, plus the structured tokens.
pub fn parse_external_answer(s: &str) -> Option<Answer> {
    match s.trim().to_ascii_lowercase().as_str() {
        "yes" => Some(Answer::Yes),
        "no" => Some(Answer::No),
        "n/a" | "na" => Some(Answer::Na),
        _ => None,
    }
}

fn id_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn external_game(v: &Value, position: usize) -> Result<ExternalGame> {
    let game_id = v.get("id").and_then(id_string).unwrap_or_else(|| format!("#{position}"));
    let schema = |message: String| Error::Schema {
        game_id: game_id.clone(),
        message,
    };
    let field = |name: &str| v.get(name).ok_or_else(|| schema(format!("missing field `{name}`")));
    field("id")?;
    let object_id = id_string(field("object_id")?).ok_or_else(|| schema("`object_id` is not an id".into()))?;
    let status = field("status")?
        .as_str()
        .ok_or_else(|| schema("`status` is not a string".into()))?
        .to_string();
    let image_id = field("image")?
        .get("id")
        .and_then(id_string)
        .ok_or_else(|| schema("missing field `image.id`".into()))?;
    let qas = field("qas")?
        .as_array()
        .ok_or_else(|| schema("`qas` is not a list".into()))?;
    let mut questions = Vec::with_capacity(qas.len());
    let mut answers = Vec::with_capacity(qas.len());
    for (i, qa) in qas.iter().enumerate() {
        let text = |name: &str| {
            qa.get(name)
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| schema(format!("qas[{i}] is missing `{name}`")))
        };
        questions.push(text("question")?);
        answers.push(text("answer")?);
    }
    Ok(ExternalGame {
        id: game_id.clone(),
        image_id,
        object_id,
        status,
        questions,
        answers,
    })
}

/// Parse GuessWhat?! games from JSON lines or a single JSON array.
pub fn parse_external_corpus(text: &str) -> Result<Vec<ExternalGame>> {
    let trimmed = text.trim_start();
    if trimmed.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "empty corpus".into(),
        });
    }
    if trimmed.starts_with('[') {
        let values: Vec<Value> = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        return values.iter().enumerate().map(|(i, v)| external_game(v, i)).collect();
    }
    let mut games = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        games.push(external_game(&v, i + 1)?);
    }
    Ok(games)
}

/// Read a GuessWhat?! corpus file; `.gz` files are not supported.
pub fn ingest_external_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<ExternalGame>> {
    if format != CorpusFormat::GuesswhatJson {
        return Err(Error::InvalidConfig(format!("{format:?} is not an external corpus format")));
    }
    parse_external_corpus(&std::fs::read_to_string(path)?)
}

/// Read a corpus file in the given format and reduce it to stat records.
pub fn load_stat_records(path: &Path, format: CorpusFormat) -> Result<Vec<StatRecord>> {
    match format {
        CorpusFormat::GameLog => read_game_log(File::open(path)?)?
            .iter()
            .enumerate()
            .map(|(i, r)| stat_record(i, r))
            .collect(),
        CorpusFormat::GuesswhatJson => ingest_external_corpus(path, format)?
            .iter()
            .map(ExternalGame::to_stat_record)
            .collect(),
    }
}

pub fn compute_corpus_stats(path: &Path, format: CorpusFormat) -> Result<CorpusStats> {
    let records = load_stat_records(path, format)?;
    if records.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no games in input".into(),
        });
    }
    corpus_stats(&records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Answer::*;

    #[test]
    fn spam_rule() {
        assert!(detect_spam(&[No, No, No]).unwrap());
        assert!(!detect_spam(&[No, Yes, No]).unwrap());
        assert!(detect_spam(&[Yes]).unwrap());
        assert!(matches!(detect_spam(&[]), Err(Error::InvalidRecord(_))));
    }

    #[test]
    fn answer_parsing() {
        assert_eq!(parse_external_answer("N/A"), Some(Na));
        assert_eq!(parse_external_answer(" yes"), Some(Yes));
        assert_eq!(parse_external_answer("maybe"), None);
    }

    #[test]
    fn words_split_on_punctuation() {
        let w: Vec<_> = words("Is it the red cup? Yes, it's").collect();
        assert_eq!(w, ["is", "it", "the", "red", "cup", "yes", "it", "s"]);
    }

    #[test]
    fn empty_input_is_a_parse_error() {
        assert!(matches!(parse_external_corpus("  \n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read_game_log("".as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let text = "{\"id\":1,\"qas\":[],\"object_id\":2,\"status\":\"success\",\"image\":{\"id\":3}}\n{oops\n";
        match parse_external_corpus(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_status_names_the_game() {
        let text = r#"{"id":17,"qas":[],"object_id":2,"image":{"id":3}}"#;
        match parse_external_corpus(text) {
            Err(Error::Schema { game_id, message }) => {
                assert_eq!(game_id, "17");
                assert!(message.contains("status"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stats_of_a_small_corpus() {
        let rec = |id: &str, scene: &str, answers: Vec<Answer>, success| StatRecord {
            game_id: id.into(),
            scene_key: scene.into(),
            goal_key: "0".into(),
            questions: answers.iter().map(|_| "Is it red?".to_string()).collect(),
            answers,
            success,
            natural_language: true,
        };
        let s = corpus_stats(&[
            rec("a", "1", vec![Yes, No, Na, No], true),
            rec("b", "1", vec![No, No], false),
        ])
        .unwrap();
        assert_eq!(s.n_questions, 6);
        assert_eq!(s.answer_dist.no, 4.0 / 6.0);
        assert_eq!(s.spam_fraction, 0.5);
        assert_eq!(s.object_success_rate, 0.5);
        assert_eq!(s.n_unique_scenes, 1);
        assert_eq!(s.n_unique_goal_objects, 1);
        assert_eq!(s.n_unique_words, Some(3));
        assert_eq!(s.n_unique_questions, None);
        assert_eq!(s.question_count_histogram, BTreeMap::from([(2, 1), (4, 1)]));
    }
}
