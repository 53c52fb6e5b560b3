mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relaytrail_core::policy::{Policy, PolicyKind};
use relaytrail_core::session::{walk_recorded_trail, AssistSession, SessionSpec};
use relaytrail_core::sim::{resolve_policies, run_virtual_walk};
use relaytrail_core::trail::synthesize_virtual_trail;

fn policies() -> (relaytrail_core::formats::ConfigFile, Vec<Policy>) {
    let file = common::calibrated();
    let mut opts = file.resolve_options(Some(3));
    opts.solver.samples = 20_000;
    opts.calibration_horizon = 2_000;
    opts.calibration_reps = 4;
    let policies = resolve_policies(&PolicyKind::ALL, &file.channel, &file.policy, &opts).unwrap();
    (file, policies)
}

#[test]
fn scripted_sessions_match_virtual_walks() {
    let (file, policies) = policies();
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let locations = 12 + (seed as usize % 17);
        let trail = synthesize_virtual_trail(&file.channel, &file.policy, &mut rng, locations).unwrap();
        for policy in &policies {
            let expected = run_virtual_walk(policy, &trail, 1, locations, &file.policy).unwrap();
            let spec = SessionSpec { cfg: file.policy.clone(), policy: policy.clone(), sink: 1 };
            let mut session = AssistSession::new("t", spec.clone()).unwrap();
            walk_recorded_trail(&mut session, &trail, locations).unwrap();
            assert_eq!(session.network(), expected, "{} on trail {seed}", policy.kind());

            let replayed = AssistSession::replay("t", spec, session.events()).unwrap();
            assert_eq!(replayed.network(), session.network());
            assert_eq!(replayed.view(), session.view());
        }
    }
}

#[test]
fn reference_trail_sessions() {
    let (file, policies) = policies();
    let trail = common::reference_trail();
    for policy in &policies {
        let spec = SessionSpec { cfg: file.policy.clone(), policy: policy.clone(), sink: 1 };
        let mut session = AssistSession::new("t1", spec).unwrap();
        walk_recorded_trail(&mut session, &trail, 11).unwrap();
        let net = session.network();
        net.validate(&file.policy).unwrap();
        let expected = if policy.kind().explores() && policy.kind() != PolicyKind::OptExploreLimLearning { Some(17) } else if !policy.kind().explores() { Some(10) } else { None };
        if let Some(m) = expected {
            assert_eq!(net.measurements, m, "{}", policy.kind());
        }
    }
}
