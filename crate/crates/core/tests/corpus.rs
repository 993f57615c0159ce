use std::path::{Path, PathBuf};

use noncoop::game::{generate_scene, Answer, CoopLabel, DialogueTurn, GameRecord, QuestionSpace, SceneConfig};
use noncoop::harness::{
    compute_corpus_stats, detect_spam_record, ingest_external_corpus, read_game_log, write_game_log, CorpusFormat,
};
use noncoop::rng::seeded;
use noncoop::Error;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// 100 games: game `i` has `2 + i % 4` turns; games 80..100 are all-"no"
/// spam, the rest cycle yes, no, n/a starting at `i % 3`.
fn synthetic_fixture() -> Vec<GameRecord> {
    let cfg = SceneConfig::with_objects(4);
    (0..100)
        .map(|i| {
            let scene = generate_scene(&cfg, &mut seeded(i as u64)).unwrap();
            let space = QuestionSpace::for_vocab(&scene.vocab);
            let len = 2 + i % 4;
            let turns = (0..len)
                .map(|t| DialogueTurn {
                    question: space.questions()[(i * 7 + t * 3) % space.len()],
                    answer: if i >= 80 { Answer::No } else { Answer::ALL[(i + t) % 3] },
                    round: t + 1,
                })
                .collect();
            let spam = i >= 80;
            GameRecord {
                object_guess: Some((scene.goal + usize::from(i % 5 == 0)) % scene.len()),
                scene,
                turns,
                coop_label: CoopLabel::from_nc(spam),
                strategy_tag: if spam { "spam_no".into() } else { "coop".into() },
                coop_guess: Some(CoopLabel::from_nc(i % 3 == 0)),
                seed: i as u64,
                notes: None,
            }
        })
        .collect()
}

#[test]
fn bundled_fixture_matches_its_recipe() {
    let path = fixtures().join("synthetic_corpus.jsonl");
    let mut expected = Vec::new();
    write_game_log(&synthetic_fixture(), &mut expected).unwrap();
    if std::env::var_os("NONCOOP_WRITE_FIXTURES").is_some() {
        std::fs::write(&path, &expected).unwrap();
    }
    assert_eq!(std::fs::read(&path).unwrap(), expected);
}

#[test]
fn game_log_round_trip() {
    let games = synthetic_fixture();
    let mut buf = Vec::new();
    write_game_log(&games, &mut buf).unwrap();
    assert_eq!(read_game_log(buf.as_slice()).unwrap(), games);
}

#[test]
fn synthetic_fixture_stats() {
    let stats = compute_corpus_stats(&fixtures().join("synthetic_corpus.jsonl"), CorpusFormat::GameLog).unwrap();
    let games = synthetic_fixture();
    let spam = games.iter().filter(|g| detect_spam_record(g).unwrap()).count();
    assert_eq!(spam, 20);
    assert_eq!(stats.spam_fraction, 0.2);
    // every fifth game has a wrong guess
    assert_eq!(stats.object_success_rate, 0.8);
    assert_eq!(stats.n_games, 100);
    assert_eq!(stats.n_unique_scenes, 100);
    assert!(stats.n_unique_questions.is_some() && stats.n_unique_words.is_none());
    let d = stats.answer_dist;
    assert!((d.yes + d.no + d.na - 1.0).abs() < 1e-9);
}

#[test]
fn two_game_guesswhat_fixture() {
    let path = fixtures().join("guesswhat_two_games.jsonl");
    let games = ingest_external_corpus(&path, CorpusFormat::GuesswhatJson).unwrap();
    assert_eq!(games.len(), 2);
    assert_eq!(games[0].id, "4012");
    assert_eq!(games[0].answers, ["No", "No", "No"]);
    assert_eq!(games[1].answers, ["Yes", "N/A"]);
    assert_eq!(games[1].status, "success");
    let stats = compute_corpus_stats(&path, CorpusFormat::GuesswhatJson).unwrap();
    assert_eq!(stats.n_games, 2);
    assert_eq!(stats.n_questions, 5);
    assert_eq!(stats.spam_fraction, 0.5);
    assert_eq!(stats.object_success_rate, 0.5);
    assert_eq!(stats.answer_dist.na, 0.2);
    assert!(stats.n_unique_words.is_some());
}

#[test]
fn guesswhat_array_form_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("games.json");
    let lines = std::fs::read_to_string(fixtures().join("guesswhat_two_games.jsonl")).unwrap();
    let array = format!("[{}]", lines.trim().lines().collect::<Vec<_>>().join(","));
    std::fs::write(&path, array).unwrap();
    assert_eq!(ingest_external_corpus(&path, CorpusFormat::GuesswhatJson).unwrap().len(), 2);
}

#[test]
fn missing_status_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    std::fs::write(
        &path,
        r#"{"id": 9, "image": {"id": 1}, "object_id": 2, "qas": [{"question": "Is it red?", "answer": "Yes"}]}"#,
    )
    .unwrap();
    match ingest_external_corpus(&path, CorpusFormat::GuesswhatJson) {
        Err(Error::Schema { game_id, message }) => {
            assert_eq!(game_id, "9");
            assert!(message.contains("status"), "{message}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn empty_and_malformed_files_are_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    for format in [CorpusFormat::GameLog, CorpusFormat::GuesswhatJson] {
        assert!(matches!(compute_corpus_stats(&empty, format), Err(Error::Parse { .. })));
    }
    let bad = dir.path().join("bad.jsonl");
    let mut good = Vec::new();
    write_game_log(&synthetic_fixture()[..2], &mut good).unwrap();
    good.extend_from_slice(b"{not json\n");
    std::fs::write(&bad, good).unwrap();
    match compute_corpus_stats(&bad, CorpusFormat::GameLog) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

/// Set `NONCOOP_PUBLIC_CORPUS` to a GuessWhat?! file to count its games.
#[test]
fn public_corpus_game_count() {
    let Some(path) = std::env::var_os("NONCOOP_PUBLIC_CORPUS").map(PathBuf::from) else {
        eprintln!("SKIP: NONCOOP_PUBLIC_CORPUS not set");
        return;
    };
    let text = std::fs::read_to_string(&path).unwrap();
    let entries = if text.trim_start().starts_with('[') {
        serde_json::from_str::<Vec<serde_json::Value>>(&text).unwrap().len()
    } else {
        text.lines().filter(|l| !l.trim().is_empty()).count()
    };
    let games = ingest_external_corpus(&path, CorpusFormat::GuesswhatJson).unwrap();
    assert_eq!(games.len(), entries);
}
