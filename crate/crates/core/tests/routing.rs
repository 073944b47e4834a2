use roundtable_core::router::{route_question, RoutingTable};
use roundtable_core::AgentRole;
use serde::Deserialize;

#[derive(Deserialize)]
struct Labeled {
    question: String,
    expected: AgentRole,
}

fn labeled() -> Vec<Labeled> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/routing_questions.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn labeled_questions_route_correctly() {
    let table = RoutingTable::shipped();
    let set = labeled();
    assert_eq!(set.len(), 20);
    let misses: Vec<_> = set
        .iter()
        .filter(|q| route_question(&q.question, &table).role != q.expected)
        .map(|q| q.question.as_str())
        .collect();
    assert!(misses.len() <= 2, "misrouted: {misses:?}");
}

#[test]
fn zero_hit_questions_go_to_planner() {
    let table = RoutingTable::shipped();
    for q in labeled().iter().map(|q| q.question.as_str()).chain(["thanks", "ok?", "1234"]) {
        let r = route_question(q, &table);
        if r.score == 0 {
            assert_eq!(r.role, AgentRole::RiskPlanner, "{q}");
        }
    }
}
