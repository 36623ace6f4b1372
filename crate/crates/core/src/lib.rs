pub mod cli;
pub mod explorer;
pub mod lang;
pub mod laws;
pub mod machine;
pub mod model;
pub mod scenarios;
pub mod semantics;
pub mod syntax;
