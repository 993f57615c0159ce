use proptest::prelude::*;

use noncoop::agent::{belief_update, BeliefState, QuestionPlayer};
use noncoop::game::{generate_scene, run_episode, truth_answer, Answer, GameRecord, QuestionSpace, SceneConfig};
use noncoop::harness::corpus::stat_record;
use noncoop::harness::{corpus_stats, detect_spam, read_game_log, write_game_log};
use noncoop::rng::seeded;
use noncoop::theory::{thm1_battery, InstanceLimits};
use noncoop::{AnswerStrategy, DecoyRule};

fn answer() -> impl Strategy<Value = Answer> {
    prop::sample::select(Answer::ALL.to_vec())
}

fn answerer() -> impl Strategy<Value = AnswerStrategy> {
    prop::sample::select(vec![
        AnswerStrategy::Cooperative,
        AnswerStrategy::Spam(Answer::Yes),
        AnswerStrategy::Spam(Answer::No),
        AnswerStrategy::Contradict,
        AnswerStrategy::AlternateGoal(DecoyRule::Uniform),
    ])
}

fn play(objects: usize, rounds: usize, strategy: &AnswerStrategy, seed: u64) -> GameRecord {
    let cfg = SceneConfig::with_objects(objects);
    let player = QuestionPlayer::for_scenes(&cfg, rounds).unwrap();
    let scene = generate_scene(&cfg, &mut seeded(seed)).unwrap();
    run_episode(&player, strategy, &scene, rounds, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn belief_stays_a_distribution(
        seed in any::<u64>(),
        objects in 2usize..9,
        lie_rate in 0.0f64..0.5,
        steps in prop::collection::vec((any::<prop::sample::Index>(), answer()), 1..8),
    ) {
        let scene = generate_scene(&SceneConfig::with_objects(objects), &mut seeded(seed)).unwrap();
        let space = QuestionSpace::for_vocab(&scene.vocab);
        let mut b = BeliefState::uniform(scene.len(), lie_rate).unwrap();
        for (k, a) in steps {
            b = belief_update(&b, &scene, &space.questions()[k.index(space.len())], a).unwrap();
            prop_assert!(b.probs.iter().all(|p| p.is_finite() && *p >= 0.0));
            prop_assert!((b.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn honest_answer_never_lowers_the_goal(
        seed in any::<u64>(),
        objects in 2usize..9,
        k in any::<prop::sample::Index>(),
    ) {
        // With no lies a truthful answer keeps the goal in the support.
        let scene = generate_scene(&SceneConfig::with_objects(objects), &mut seeded(seed)).unwrap();
        let space = QuestionSpace::for_vocab(&scene.vocab);
        let q = space.questions()[k.index(space.len())];
        let b = BeliefState::uniform(scene.len(), 0.0).unwrap();
        let next = belief_update(&b, &scene, &q, truth_answer(&scene, scene.goal, &q)).unwrap();
        prop_assert!(next.probs[scene.goal] >= 1.0 / scene.len() as f64 - 1e-12);
    }

    #[test]
    fn episodes_have_every_round_and_are_reproducible(
        seed in any::<u64>(),
        objects in 2usize..9,
        rounds in 1usize..6,
        strategy in answerer(),
    ) {
        let a = play(objects, rounds, &strategy, seed);
        prop_assert_eq!(a.turns.len(), rounds);
        prop_assert!(a.turns.iter().enumerate().all(|(i, t)| t.round == i + 1));
        prop_assert!(a.object_guess.unwrap() < objects);
        prop_assert_eq!(a.coop_label.is_nc(), strategy.label().is_nc());
        prop_assert_eq!(play(objects, rounds, &strategy, seed), a);
    }

    #[test]
    fn game_log_round_trip(
        seeds in prop::collection::vec(any::<u64>(), 1..6),
        strategy in answerer(),
    ) {
        let games: Vec<GameRecord> = seeds.iter().map(|&s| play(4, 3, &strategy, s)).collect();
        let mut buf = Vec::new();
        write_game_log(&games, &mut buf).unwrap();
        prop_assert_eq!(read_game_log(buf.as_slice()).unwrap(), games);
    }

    #[test]
    fn spam_fraction_is_the_mean_spam_flag(
        seeds in prop::collection::vec((any::<u64>(), answerer(), 1usize..6), 1..12),
    ) {
        let games: Vec<GameRecord> = seeds.iter().map(|(s, a, r)| play(3, *r, a, *s)).collect();
        let records: Vec<_> = games.iter().enumerate().map(|(i, g)| stat_record(i, g).unwrap()).collect();
        let stats = corpus_stats(&records).unwrap();
        let flagged = games
            .iter()
            .filter(|g| detect_spam(&g.answers().collect::<Vec<_>>()).unwrap())
            .count();
        prop_assert_eq!(stats.spam_fraction, flagged as f64 / games.len() as f64);
        let d = stats.answer_dist;
        prop_assert!((d.yes + d.no + d.na - 1.0).abs() < 1e-9);
    }

    #[test]
    fn spam_means_all_answers_equal(answers in prop::collection::vec(answer(), 1..10)) {
        prop_assert_eq!(detect_spam(&answers).unwrap(), answers.iter().all(|a| *a == answers[0]));
    }

    #[test]
    fn cooperation_bound_holds_on_random_instances(seed in any::<u64>(), delta in 0.01f64..1.0) {
        let rows = thm1_battery(10, &InstanceLimits::default(), delta, &mut seeded(seed)).unwrap();
        prop_assert!(rows.iter().all(|r| r.holds), "{:?}", rows.iter().find(|r| !r.holds));
    }
}
