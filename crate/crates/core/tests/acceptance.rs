//! One test per primary acceptance criterion. Each prints a single
//! `[PASS]` or `[FAIL]` line with the measured quantity before asserting.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use gridmmo::arena::{
    benchmark, by_name, elo_ratings, pairwise_records, run_episode, run_many, PairRecord, Policy, Records,
};
use gridmmo::config::{GameConfig, Profile, Subsystem, Value};
use gridmmo::entity::LevelRule;
use gridmmo::env::Env;
use gridmmo::events::{EventKind, GameEvent, LogRecord};
use gridmmo::items::ItemType;
use gridmmo::minigame::{
    determine_difficulty, game_subsystems, setup_episode, Difficulty, GameHistory, MinigameKind,
};
use gridmmo::obs::ObservationLayout;
use gridmmo::tasks::{agent_progress, evaluation_suite, normalized_score, EvalContext, FactsLedger, LedgerRules, TaskState};
use gridmmo::world::Pos;

fn verdict(name: &str, pass: bool, detail: impl AsRef<str>) {
    println!("[{}] {name}: {}", if pass { "PASS" } else { "FAIL" }, detail.as_ref());
}

fn policy(name: &str) -> Box<dyn Policy> {
    by_name(name).expect("known policy")
}

#[test]
fn observation_size_exactness() {
    let start = Instant::now();
    let mini = ObservationLayout::new(Profile::Mini);
    let full = ObservationLayout::new(Profile::Full);
    // tick, agent id, task embedding, 15x15 tiles x 7, 100 entities x 31, 32 comm rows x 4.
    let mini_body = 1 + 1 + 27 + 15 * 15 * 7 + 100 * 31 + 32 * 4;
    // move 5, attack style 3, attack target 100 + no-op, comm token 127.
    let mini_masks = 5 + 3 + 101 + 127;
    // inventory 12 x 16, market 384 x 16.
    let full_extra_body = 12 * 16 + 384 * 16;
    // use, destroy, give, sell: 12 + no-op each; two targets 101; price and
    // gold amount 99; buy 384 + no-op.
    let full_extra_masks = 4 * 13 + 2 * 101 + 2 * 99 + 385;
    let ok = mini.len == 5068
        && full.len == 12241
        && mini_body == 4832
        && mini_masks == 236
        && full_extra_body == 192 + 6144
        && full_extra_masks == 837
        && mini.len == mini_body + mini_masks
        && full.len == mini_body + mini_masks + full_extra_body + full_extra_masks
        && mini.components.iter().map(|c| c.rows * c.cols).sum::<usize>() == mini.len
        && full.components.iter().map(|c| c.rows * c.cols).sum::<usize>() == full.len
        && start.elapsed().as_secs_f64() < 1.0;
    verdict(
        "observation size",
        ok,
        format!("mini {} full {} ({:?})", mini.len, full.len, start.elapsed()),
    );
    assert!(ok);
}

#[test]
fn subsystem_matrix() {
    use MinigameKind as K;
    use Subsystem as S;
    // (experiment, game, team, resources, combat, npc, comm, extras)
    let table = [
        (Profile::Full, K::Survival, false, true, true, true, true, true),
        (Profile::Full, K::TeamBattle, true, true, true, true, true, true),
        (Profile::Full, K::MultiTask, false, true, true, true, true, true),
        (Profile::Mini, K::TeamBattle, true, true, true, true, true, false),
        (Profile::Mini, K::ProtectTheKing, true, true, true, true, true, false),
        (Profile::Mini, K::RaceToCenter, false, true, false, false, false, false),
        (Profile::Mini, K::KingOfTheHill, true, true, true, false, true, false),
        (Profile::Mini, K::Sandwich, true, false, true, true, true, false),
    ];
    let mut mismatches = Vec::new();
    for (profile, kind, team, res, combat, npc, comm, extras) in table {
        let mut want: BTreeSet<S> = [S::Terrain].into_iter().collect();
        for (on, sub) in [(res, S::Resource), (combat, S::Combat), (npc, S::Npc), (comm, S::Communication)] {
            if on {
                want.insert(sub);
            }
        }
        if extras {
            want.extend([S::Item, S::Equipment, S::Profession, S::Progression, S::Exchange]);
        }
        // Also through the episode setup path, which intersects with the profile.
        let mut cfg = GameConfig::new(profile);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        setup_episode(kind, &mut cfg, &GameHistory::default(), &mut rng).expect("supported");
        if game_subsystems(kind, profile) != want || *cfg.subsystems() != want || kind.is_team_game() != team {
            mismatches.push(format!("{profile:?}/{kind:?}"));
        }
    }
    verdict("subsystem matrix", mismatches.is_empty(), format!("{} rows, mismatches {mismatches:?}", table.len()));
    assert!(mismatches.is_empty());
}

/// Replays a win/loss sequence and returns the difficulty used for each game.
fn difficulties(kind: MinigameKind, results: &[bool], cfg: &GameConfig) -> Vec<Difficulty> {
    let mut h = GameHistory::default();
    let mut out = Vec::new();
    for won in results {
        let d = determine_difficulty(kind, &h, cfg);
        out.push(d);
        h.record(kind, *won, d);
    }
    out
}

#[test]
fn adaptive_difficulty_rule() {
    let cfg = GameConfig::new(Profile::Mini);
    let mut ok = true;

    // Every game won: 40, 48, ... up to the configured 128, then held.
    let maps = difficulties(MinigameKind::RaceToCenter, &[true; 15], &cfg);
    let want: Vec<u32> = (0..15).map(|i| (40 + 8 * i).min(128)).collect();
    ok &= maps == want.iter().map(|m| Difficulty::MapSize(*m)).collect::<Vec<_>>();

    // A loss after a win at the current size blocks the step.
    let maps = difficulties(MinigameKind::RaceToCenter, &[true, false, false, true, true], &cfg);
    ok &= maps
        == [40, 48, 48, 48, 56]
            .iter()
            .map(|m| Difficulty::MapSize(*m))
            .collect::<Vec<_>>();

    // A smaller configured map caps the progression.
    let mut small = GameConfig::new(Profile::Mini);
    small.set("MAP_CENTER", Value::Int(64)).unwrap();
    let capped = difficulties(MinigameKind::RaceToCenter, &[true; 8], &small);
    ok &= capped.last() == Some(&Difficulty::MapSize(64));

    // Hold duration 10 -> 200 in steps of 10.
    let holds = difficulties(MinigameKind::KingOfTheHill, &[true; 25], &cfg);
    ok &= holds.first() == Some(&Difficulty::Hold(10));
    ok &= holds[19] == Difficulty::Hold(200) && holds.last() == Some(&Difficulty::Hold(200));

    // Disabled adaptation never moves.
    let mut fixed = GameConfig::new(Profile::Mini);
    fixed.set("ADAPTIVE_DIFFICULTY", Value::Bool(false)).unwrap();
    ok &= difficulties(MinigameKind::KingOfTheHill, &[true; 5], &fixed)
        .iter()
        .all(|d| *d == Difficulty::Hold(10));

    // Monotone under random histories.
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let key = |d: &Difficulty| match d {
        Difficulty::MapSize(m) => *m as f64,
        Difficulty::Hold(h) => *h as f64,
        Difficulty::NpcMultiplier(x) => *x,
        Difficulty::None => 0.0,
    };
    for _ in 0..200 {
        for kind in [MinigameKind::RaceToCenter, MinigameKind::KingOfTheHill, MinigameKind::Sandwich] {
            let results: Vec<bool> = (0..40).map(|_| rng.random_bool(0.5)).collect();
            let ds = difficulties(kind, &results, &cfg);
            ok &= ds.windows(2).all(|w| key(&w[0]) <= key(&w[1]));
        }
    }
    verdict("adaptive difficulty", ok, "map 40..128 step 8, hold 10..200, monotone");
    assert!(ok);
}

/// Pearson chi-square p-value against a uniform distribution over `bins`.
fn uniform_p(counts: &BTreeMap<i64, u32>, bins: &[i64]) -> f64 {
    let total: u32 = counts.values().sum();
    let expected = total as f64 / bins.len() as f64;
    let stat: f64 = bins
        .iter()
        .map(|b| {
            let o = *counts.get(b).unwrap_or(&0) as f64;
            (o - expected).powi(2) / expected
        })
        .sum();
    1.0 - ChiSquared::new((bins.len() - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn domain_randomization() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut onsets = BTreeMap::new();
    let mut speeds = BTreeMap::new();
    let mut npcs = BTreeMap::new();
    let mut in_range = true;
    for _ in 0..2000 {
        let mut cfg = GameConfig::new(Profile::Full);
        setup_episode(MinigameKind::Survival, &mut cfg, &GameHistory::default(), &mut rng).unwrap();
        let onset = cfg.int("DEATH_FOG_ONSET");
        let inv_speed = (1.0 / cfg.real("DEATH_FOG_SPEED")).round() as i64;
        let npc = cfg.int("NPC_N");
        in_range &= (32..256).contains(&onset) && (7..12).contains(&inv_speed) && (64..256).contains(&npc);
        in_range &= (cfg.real("DEATH_FOG_SPEED") - 1.0 / inv_speed as f64).abs() < 1e-12;
        *onsets.entry(onset).or_insert(0) += 1;
        *speeds.entry(inv_speed).or_insert(0) += 1;
        *npcs.entry(npc).or_insert(0) += 1;
    }
    let p_onset = uniform_p(&onsets, &(32..256).collect::<Vec<_>>());
    let p_speed = uniform_p(&speeds, &(7..12).collect::<Vec<_>>());
    let p_npc = uniform_p(&npcs, &(64..256).collect::<Vec<_>>());
    let secs = start.elapsed().as_secs_f64();
    let ok = in_range && p_onset > 0.01 && p_speed > 0.01 && p_npc > 0.01 && secs < 30.0;
    verdict(
        "domain randomization",
        ok,
        format!("p onset {p_onset:.3} speed {p_speed:.3} npc {p_npc:.3}, in range {in_range}, {secs:.2}s"),
    );
    assert!(ok);
}

#[test]
fn elo_oracle() {
    let mut records = Records::new();
    records.insert(("a".into(), "b".into()), PairRecord { wins: 150, losses: 50, draws: 0 });
    let t = elo_ratings(&records).unwrap();
    let gap = t.ratings["a"] - t.ratings["b"];
    let want = 400.0 * 3f64.log10();
    let mut draws = Records::new();
    draws.insert(("a".into(), "b".into()), PairRecord { wins: 0, losses: 0, draws: 200 });
    let d = elo_ratings(&draws).unwrap();
    let uniform = d.ratings.values().all(|r| (r - 1000.0).abs() < 1e-9);
    let ok = (gap - want).abs() <= 0.01 && uniform && !t.regularized;
    verdict("elo oracle", ok, format!("gap {gap:.4} want {want:.4}, draws uniform {uniform}"));
    assert!(ok);
}

fn determinism_cfg(kind: MinigameKind) -> GameConfig {
    let profile = if kind.requires_full() || kind == MinigameKind::Survival {
        Profile::Full
    } else {
        Profile::Mini
    };
    GameConfig::new(profile)
}

#[test]
fn determinism() {
    let start = Instant::now();
    let brawler = policy("brawler");
    let random = policy("random_valid");
    let pols: [&dyn Policy; 2] = [brawler.as_ref(), random.as_ref()];
    let seeds: Vec<u64> = (0..20).collect();
    let mut mismatches = Vec::new();
    let mut episodes = 0;
    for kind in MinigameKind::ALL {
        let cfg = determinism_cfg(kind);
        let first: Vec<String> = seeds
            .iter()
            .map(|s| run_episode(&cfg, kind, &pols, *s).unwrap().result.digest)
            .collect();
        let second: Vec<String> = seeds
            .iter()
            .map(|s| run_episode(&cfg, kind, &pols, *s).unwrap().result.digest)
            .collect();
        let parallel: Vec<String> = run_many(&cfg, kind, &pols, &seeds, 4)
            .unwrap()
            .into_iter()
            .map(|r| r.result.digest)
            .collect();
        episodes += 3 * seeds.len();
        if first != second || first != parallel {
            mismatches.push(kind);
        }
        let distinct: BTreeSet<&String> = first.iter().collect();
        if distinct.len() < 2 {
            mismatches.push(kind);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = mismatches.is_empty() && secs < 300.0;
    verdict(
        "determinism",
        ok,
        format!("{episodes} episodes, mismatches {mismatches:?}, {secs:.1}s"),
    );
    assert!(ok);
}

#[test]
fn task_progress_telescoping() {
    let start = Instant::now();
    let random = policy("random_valid");
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for ep in 0..100u64 {
        let kind = MinigameKind::ALL[ep as usize % MinigameKind::ALL.len()];
        let cfg = determinism_cfg(kind);
        let mut env = Env::new(cfg).unwrap();
        env.reset(1000 + ep, Some(kind)).unwrap();
        let layout = env.layout().clone();
        let n = env.num_agents();
        let dims = layout.actions.len();
        let mut rng = ChaCha8Rng::seed_from_u64(ep);
        let mut sums = vec![0.0f64; n];
        let info = gridmmo::arena::EpisodeInfo {
            kind,
            center: env.episode().unwrap().state.map.center(),
        };
        loop {
            let mut flat = vec![0i64; n * dims];
            let ep_ref = env.episode().unwrap();
            for i in 0..n {
                random.act(ep_ref.frame.agent(&layout, i), &layout, &info, &mut rng, &mut flat[i * dims..(i + 1) * dims]);
            }
            let out = env.step(&flat).unwrap();
            for (s, r) in sums.iter_mut().zip(&out.rewards) {
                *s += r;
            }
            if out.done {
                break;
            }
        }
        let referee = &env.episode().unwrap().referee;
        for (i, s) in sums.iter().enumerate() {
            worst = worst.max((s - referee.total_max_progress(i)).abs());
        }
        count += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst <= 1e-9 && secs < 120.0;
    verdict("task-progress telescoping", ok, format!("{count} episodes, max error {worst:e}, {secs:.1}s"));
    assert!(ok);
}

#[test]
fn behavioral_sanity() {
    let start = Instant::now();
    let forager = policy("forager");
    let brawler = policy("brawler");
    let racer = policy("racer");
    let random = policy("random_valid");

    // Forager vs random on lifespan, combat and NPCs removed. Agents of the
    // two policies alternate within each episode; the pair is compared on
    // mean lifespan.
    let mut cfg = GameConfig::new(Profile::Full);
    let mut subs = cfg.subsystems().clone();
    subs.remove(&Subsystem::Combat);
    subs.remove(&Subsystem::Npc);
    cfg.set_subsystems(subs);
    let pols: [&dyn Policy; 2] = [forager.as_ref(), random.as_ref()];
    let seeds: Vec<u64> = (0..100).collect();
    let runs = run_many(&cfg, MinigameKind::Survival, &pols, &seeds, 1).unwrap();
    let mean_life = |r: &gridmmo::arena::EpisodeResult, p: usize| {
        let v: Vec<f64> = r
            .agent_policy
            .iter()
            .zip(&r.lifespans)
            .filter(|(a, _)| **a == p)
            .map(|(_, l)| *l as f64)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let forager_wins = runs.iter().filter(|r| mean_life(&r.result, 0) > mean_life(&r.result, 1)).count();
    let forage_ok = forager_wins >= 80;
    verdict("behavior: forager outlives random", forage_ok, format!("{forager_wins}/100 episodes"));

    // Brawler vs random over a team-battle tournament.
    let cfg = GameConfig::new(Profile::Mini);
    let pols: [&dyn Policy; 2] = [brawler.as_ref(), random.as_ref()];
    let seeds: Vec<u64> = (0..200).collect();
    let results: Vec<_> = run_many(&cfg, MinigameKind::TeamBattle, &pols, &seeds, 1)
        .unwrap()
        .into_iter()
        .map(|r| r.result)
        .collect();
    let table = elo_ratings(&pairwise_records(&results)).unwrap();
    let gap = table.ratings["brawler"] - table.ratings["random_valid"];
    let brawl_ok = gap >= 100.0;
    verdict("behavior: brawler elo margin", brawl_ok, format!("brawler - random_valid = {gap:.1}"));

    // Racer vs random on the race.
    let pols: [&dyn Policy; 2] = [racer.as_ref(), random.as_ref()];
    let runs = run_many(&cfg, MinigameKind::RaceToCenter, &pols, &seeds[..100], 1).unwrap();
    let racer_wins = runs.iter().filter(|r| r.result.winner_policy == Some(0)).count();
    let race_ok = racer_wins >= 95;
    verdict("behavior: racer wins race", race_ok, format!("{racer_wins}/100 episodes"));

    let secs = start.elapsed().as_secs_f64();
    let ok = forage_ok && brawl_ok && race_ok && secs < 900.0;
    verdict("behavioral sanity", ok, format!("{secs:.1}s"));
    assert!(ok);
}

#[test]
fn relative_throughput() {
    let random = policy("random_valid");
    let pols: [&dyn Policy; 1] = [random.as_ref()];
    // Interleaved trials, best of each: scheduler noise only ever slows a run.
    let (mut mini, mut full) = (0.0f64, 0.0f64);
    for _ in 0..3 {
        let m = benchmark(&GameConfig::new(Profile::Mini), MinigameKind::TeamBattle, 4, &pols, 1).unwrap();
        let f = benchmark(&GameConfig::new(Profile::Full), MinigameKind::TeamBattle, 4, &pols, 1).unwrap();
        mini = mini.max(m.throughput);
        full = full.max(f.throughput);
    }
    let ratio = mini / full;
    let ok = ratio > 2.0;
    verdict(
        "relative throughput",
        ok,
        format!(
            "mini {mini:.0} full {full:.0} agent-steps/s, ratio {ratio:.2}"
        ),
    );
    assert!(ok);
}

#[test]
fn multitask_normalized_score() {
    let rules = LedgerRules {
        progression: true,
        combat_xp: 1,
        ammunition_xp: 10,
        consumable_xp: 10,
        level: LevelRule { base: 1, max: 10, threshold: 20 },
        base_gold: 0,
    };
    let ev = |tick: u32, kind: EventKind, item: u8, level: u8, amount: i64| {
        let mut e = GameEvent::new(tick, 1, kind);
        e.item = item;
        e.level = level;
        e.amount = amount;
        LogRecord::Event(e)
    };
    let mut trace = vec![LogRecord::Position { tick: 1, id: 1, pos: Pos::new(70, 70) }];
    for t in 0..5 {
        trace.push(ev(10 + t, EventKind::PlayerKill, 0, 0, 0));
    }
    for t in 0..4 {
        trace.push(ev(20 + t, EventKind::DefeatNpc, 0, 2, 0));
    }
    trace.push(ev(30, EventKind::GoFarthest, 0, 0, 32));
    trace.push(LogRecord::Position { tick: 31, id: 1, pos: Pos::new(80, 80) });
    trace.push(LogRecord::Position { tick: 32, id: 1, pos: Pos::new(75, 80) });
    for t in 0..2 {
        trace.push(ev(40 + t, EventKind::HarvestItem, ItemType::Whetstone as u8, 1, 0));
    }
    trace.push(ev(50, EventKind::EquipItem, ItemType::Hat as u8, 3, 1));
    trace.push(ev(60, EventKind::BuyItem, ItemType::Ration as u8, 1, 10));
    trace.push(ev(70, EventKind::EarnGold, 0, 0, 30));
    trace.push(ev(256, EventKind::AgentDeath, 0, 0, 0));

    let suite = evaluation_suite();
    let mut ledger = FactsLedger::new(1, rules);
    let mut states = vec![TaskState::default(); suite.len()];
    for (k, rec) in trace.iter().enumerate() {
        ledger.apply(rec);
        let tick = match rec {
            LogRecord::Event(e) => e.tick,
            LogRecord::Position { tick, .. } => *tick,
        };
        let ctx = EvalContext {
            tick: tick.max(k as u32),
            center: Pos::new(64, 64),
            radius: 60,
            winner: None,
            team_hold: &[],
            leader_alive: &[],
        };
        let facts = ledger.facts(1).unwrap();
        for (t, s) in suite.iter().zip(states.iter_mut()) {
            s.update(agent_progress(&t.predicate, 1, None, facts, &ctx));
        }
    }
    let per: Vec<_> = suite.iter().zip(&states).map(|(t, s)| (t.category, s.max_progress)).collect();
    let got = normalized_score(&per).unwrap();

    // Hand computation, category by category.
    let survival = 256.0 / 1024.0;
    let combat = (5.0 / 20.0 + 4.0 / 20.0 + 0.0) / 3.0;
    let exploration = (32.0 / 64.0 + 1.0) / 2.0;
    // Two whetstone harvests at 10 XP reach level 2 of 10 in one of 8 skills.
    let skill = (1.0 / 9.0) / 8.0;
    // Whetstone harvest 2/20 at min level 1; hat equipped at level 3 counts
    // for both equip tasks; one armor piece of four in six armed tasks.
    let item = (2.0 / 20.0 + 1.0 + 1.0 + 6.0 * 0.99 * 0.25) / 44.0;
    // One earn event and one buy event of 20; 30 earned of 100; hoard peaks
    // at 20 since the purchase came first; profit 20 of 100.
    let market = (1.0 / 20.0 + 1.0 / 20.0 + 0.3 + 0.2 + 0.2) / 5.0;
    let want = 100.0 / 6.0 * (survival + combat + exploration + skill + item + market);
    let ok = suite.len() == 63 && (got - want).abs() < 1e-12;
    verdict("multi-task normalized score", ok, format!("got {got:.12} want {want:.12}"));
    assert!(ok);
}
