use super::{DgRec, ModelConfig, SocialContext};
use crate::graphstore::SocialGraph;
use crate::ingest::{ItemIndex, Session, SessionStore, UserIndex};
use crate::rng::{self, streams};
use crate::tensor::{gradient_check, GradCheckOptions, GradCheckReport, Tape};
use crate::Result;

pub const TOY_USERS: usize = 4;
pub const TOY_ITEMS: usize = 6;

/// The small instance used for gradient verification: hidden size 5, two
/// attention layers with fan-outs (2, 2) and no dropout.
pub fn toy_config() -> ModelConfig {
    ModelConfig {
        hidden: 5,
        embed: 5,
        layers: 2,
        fanouts: vec![2, 2],
        dropout: 0.0,
        ..ModelConfig::default()
    }
}

fn session(user: u32, time_index: u32, start: i64, items: &[u32]) -> Session {
    Session {
        user: UserIndex(user),
        time_index,
        start,
        items: items.iter().map(|&i| ItemIndex(i)).collect(),
    }
}

/// A four-user friendship path with a cold friend, and the sessions the
/// toy loss is taken over.
pub fn toy_world() -> (SocialGraph, SessionStore, Vec<Session>) {
    let u = UserIndex;
    let graph = SocialGraph::from_edges(TOY_USERS, [(u(0), u(1)), (u(0), u(2)), (u(1), u(2)), (u(2), u(3))])
        .expect("valid toy edges");
    let mut history = SessionStore::new();
    history.push(session(0, 1, 0, &[0, 1, 2]));
    history.push(session(1, 1, 10, &[3, 4]));
    history.push(session(2, 1, 20, &[5, 0, 3]));
    history.push(session(1, 2, 200, &[1, 1, 5]));
    let targets = vec![session(0, 2, 100, &[2, 4, 1, 5]), session(2, 2, 300, &[0, 3, 2])];
    (graph, history, targets)
}

/// Central-difference check of every parameter of the toy model in 64-bit
/// precision, on the summed loss of the toy target sessions.
pub fn toy_gradient_check(opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let (graph, history, targets) = toy_world();
    let mut config = toy_config();
    config.seed = opts.seed;
    let DgRec { arch, mut params } = DgRec::<f64>::new(config, TOY_USERS, TOY_ITEMS)?;
    let ctx = SocialContext {
        graph: &graph,
        history: &history,
    };
    gradient_check(
        &mut params,
        |tape: &mut Tape<'_, f64>| {
            let mut total = None;
            for (k, s) in targets.iter().enumerate() {
                let mut sample = rng::derive(opts.seed, streams::SAMPLING, &[k as u64]);
                let mut dropout = rng::derive(opts.seed, streams::DROPOUT, &[k as u64]);
                if let Some((loss, _)) = arch.session_loss(tape, s, ctx, &mut sample, &mut dropout, true)? {
                    total = Some(match total {
                        Some(t) => tape.add(t, loss)?,
                        None => loss,
                    });
                }
            }
            total.ok_or(crate::Error::Empty("toy training positions"))
        },
        opts,
    )
}
