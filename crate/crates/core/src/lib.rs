pub mod adaptivity;
pub mod assembly;
pub mod driver;
pub mod diagnostics;
pub mod fespace;
pub mod imex;
pub mod linalg;
pub mod mesh;
pub mod models;
pub mod par;
pub mod problem;
