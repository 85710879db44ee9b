//! Spatial audio formats on the sphere: Ambisonics, a spherical wavelet
//! format on an octahedral subdivision mesh, and numerical optimization of
//! decoders and wavelet filters.

pub mod decoderopt;
pub mod error;
pub mod eval;
pub mod io;
pub mod mesh;
pub mod optcore;
pub mod sphere;
pub mod waveletopt;
pub mod wavelets;

pub use decoderopt::{
    Band, CostWeights, DecoderOptions, DecodingMatrix, Encoder, Format, Observables, SwfEncoder,
};
pub use error::{Error, Result};
pub use mesh::{build_mesh, SubdivisionMesh};
pub use sphere::{Direction, SpeakerLayout};
pub use wavelets::{Family, FilterBank, LevelFilters};
