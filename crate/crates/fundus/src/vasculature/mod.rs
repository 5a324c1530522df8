//! Vessel-map processing: baseline segmentation, skeletonization, exact
//! distance transform, main-course extraction, parabola fitting, fovea
//! localization, and the macula template check.

mod distance;
mod macula;
mod parabola;
mod segment;
mod skeleton;

pub use distance::{distance_transform, extract_main_course, MainCoursePoint, MainCoursePoints};
pub use macula::{assess_macula, MaculaAssessment};
pub use parabola::{fit_parabola, locate_fovea, parabola_point, ParabolaFit};
pub use segment::{baseline_segment_vessels, VesselMap, VesselSource};
pub use skeleton::skeletonize;
