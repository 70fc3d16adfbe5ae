mod common;

use common::*;
use crest::grid::{DistanceOracle, GridMap};
use crest::hungarian::{assign, total_cost};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn distances_match_bfs(w in 1usize..9, h in 1usize..9, blocked in prop::collection::vec(any::<bool>(), 64), src in 0u32..64) {
        let mut map = GridMap::open(w, h);
        for i in 0..w * h {
            if blocked[i] && i % 3 == 0 {
                map.set_blocked(crest::grid::Cell(i as u32), true);
            }
        }
        let src = crest::grid::Cell(src % (w * h) as u32);
        prop_assume!(map.is_free(src));
        let d = DistanceOracle::new(&map);
        let expect = bfs_dist(&map, src);
        for c in map.free_cells() {
            prop_assert_eq!(d.dist(src, c), expect[c.index()]);
        }
    }

    #[test]
    fn assignment_is_optimal(rows in 1usize..=6, cols in 1usize..=6, vals in prop::collection::vec(0i64..50, 36)) {
        let cost: Vec<Vec<i64>> = (0..rows).map(|r| (0..cols).map(|c| vals[r * 6 + c]).collect()).collect();
        let a = assign(&cost);
        let matched = a.iter().flatten().count();
        prop_assert_eq!(matched, rows.min(cols));
        let mut cols_used: Vec<usize> = a.iter().flatten().copied().collect();
        cols_used.sort_unstable();
        cols_used.dedup();
        prop_assert_eq!(cols_used.len(), matched);
        prop_assert_eq!(total_cost(&cost, &a), brute_assignment(&cost));
    }
}

#[test]
fn carry_arrival_matches_time_expanded_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut solved = 0;
    for i in 0..300 {
        let case = RandomCarry::generate(&mut rng);
        let (got, expect) = case.compare();
        assert_eq!(got, expect, "case {i}: {:?}", case.segment);
        solved += got.is_some() as usize;
    }
    assert!(solved > 150, "only {solved} solvable queries");
}

fn random_plans(count: u64) -> Vec<(crest::instance::Instance, crest::plan::ShelfPlan)> {
    use crest::layout::{generate_instance, LayoutKind, LayoutSpec};
    let mut out = Vec::new();
    for seed in 0..count {
        let kind = [LayoutKind::R2r, LayoutKind::S2w, LayoutKind::Dne][(seed % 3) as usize];
        let spec = LayoutSpec { kind, width: 8 + (seed % 5) as usize * 2, height: 10, density: 0.15, agents: 3, seed };
        let Ok(inst) = generate_instance(&spec) else { continue };
        if let Ok(plan) = crest::seed::plan_shelves_prioritized(&inst, seed, 20) {
            out.push((inst, plan));
        }
    }
    out
}

/// Simplified node index of every timestep of a trajectory.
fn node_of(path: &[crest::grid::Cell]) -> Vec<usize> {
    let mut idx = 0;
    path.iter()
        .enumerate()
        .map(|(t, &c)| {
            if t > 0 && path[t - 1] != c {
                idx += 1;
            }
            idx
        })
        .collect()
}

#[test]
fn arcs_match_pairwise_scan() {
    use crest::depgraph::{build_dep, WaypointId};
    use std::collections::BTreeSet;
    let plans = random_plans(30);
    assert!(plans.len() >= 20);
    for (_, plan) in &plans {
        let g = build_dep(plan);
        let got: BTreeSet<(WaypointId, WaypointId)> = g.arcs().map(|a| (a.src, a.dst)).collect();
        let mut expect = BTreeSet::new();
        let nodes: Vec<Vec<usize>> = (0..plan.len()).map(|s| node_of(plan.path(s))).collect();
        for s in 0..plan.len() {
            for q in 0..plan.len() {
                if s == q {
                    continue;
                }
                let (ps, pq) = (plan.path(s), plan.path(q));
                for k in 0..ps.len() {
                    for k2 in k + 1..pq.len() {
                        if ps[k] == pq[k2] && nodes[s][k] + 1 < g.path(s).len() {
                            expect.insert((WaypointId::new(s, nodes[s][k] + 1), WaypointId::new(q, nodes[q][k2])));
                        }
                    }
                }
            }
        }
        assert_eq!(got, expect);
        assert!(g.is_acyclic());
    }
}

/// Steps every shelf forward one waypoint per tick once its predecessors
/// have been reached.
fn simulate_makespan(g: &crest::depgraph::DependencyGraph, start: &[u32]) -> Option<u32> {
    use crest::depgraph::WaypointId;
    let m = g.num_shelves();
    let mut reach: Vec<Vec<Option<u32>>> = (0..m).map(|s| vec![None; g.path(s).len()]).collect();
    let mut at: Vec<usize> = (0..m).map(|s| g.next(s) - 1).collect();
    for s in 0..m {
        reach[s][at[s]] = Some(start[s]);
    }
    let horizon = start.iter().max().unwrap() + g.paths().iter().map(Vec::len).sum::<usize>() as u32 + 1;
    for t in 0..=horizon {
        let mut moves = Vec::new();
        for s in 0..m {
            let k = at[s];
            if k + 1 == g.path(s).len() || reach[s][k].unwrap() > t {
                continue;
            }
            let ready = g.deps(WaypointId::new(s, k + 1)).iter().all(|d| {
                let done = if g.is_traversed(d.src) {
                    g.passing_time(d.src)
                } else {
                    reach[d.src.shelf][d.src.index]
                };
                done.is_some_and(|x| x <= t)
            });
            if ready {
                moves.push(s);
            }
        }
        for s in moves {
            at[s] += 1;
            reach[s][at[s]] = Some(t + 1);
        }
    }
    (0..m)
        .map(|s| reach[s].last().unwrap().map(|r| if g.is_complete(s) { start[s] } else { r }))
        .try_fold(0, |acc, r| r.map(|r| acc.max(r)))
}

#[test]
fn estimate_matches_event_simulation() {
    use crest::depgraph::build_dep;
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (_, plan) in random_plans(30) {
        let g = build_dep(&plan);
        for _ in 0..5 {
            let start: Vec<u32> = (0..plan.len()).map(|_| rng.gen_range(0..6)).collect();
            assert_eq!(g.estimate_makespan(&start), simulate_makespan(&g, &start));
        }
    }
}
