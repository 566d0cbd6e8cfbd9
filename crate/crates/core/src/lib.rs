pub mod error;
pub mod lang;
pub mod normalize;
pub mod graph;
pub mod rules;
pub mod teacher;
pub mod gen;
pub mod rollout;
pub mod corpus;
pub mod prepare;
