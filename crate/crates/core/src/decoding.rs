pub struct BeamCandidate;
pub trait BeamScorer {}
pub struct FilteredRoute;
pub fn beam_search() {}
pub fn filter_candidates() {}
