//! Core of the latent voice explorer.
//!
//! The pipeline runs in three stages. A corpus of WAV files is analysed into
//! utterance-level prosody statistics ([`style`]), standardized and stored as
//! a lookup table ([`table`]). The table is projected to a plane with PCA or
//! t-SNE ([`reduction`]) so a user can click on it. A click is snapped to the
//! nearest stored utterance ([`picker`]) and its latent vector drives the
//! synthesis backend ([`synthesis`]), which renders a spectrogram and inverts
//! it with Griffin-Lim ([`acoustic`]).

pub mod acoustic;
pub mod picker;
pub mod reduction;
pub mod style;
pub mod synthesis;
pub mod table;

pub use acoustic::{AudioBuffer, FrameConfig};
pub use picker::{Pick, PointIndex, Viewport};
pub use reduction::{BoundingBox, Embedding2D, ReductionMethod, TsneConfig};
pub use style::{LatentVector, RawStyleVector, Scaler};
pub use synthesis::{ProsodyParams, SynthesisBackend, SynthesisRequest, SynthesisResult};
pub use table::{LatentTable, UtteranceRecord};
