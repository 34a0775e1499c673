//! Decision procedures and numerical cross-checks for compactness and
//! nuclearity of embeddings between weighted Besov and Triebel-Lizorkin
//! spaces, spaces on bounded domains and radial subspaces.

pub mod bounds;
pub mod classifier;
pub mod cli;
pub mod exponents;
pub mod nucdiag;
pub mod quad;
pub mod seqmodel;
pub mod verdict;
pub mod weights;
