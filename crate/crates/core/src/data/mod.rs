//! Dataset loading and preparation: the binary classification format,
//! PNG/PPM image files, augmentation, noise corruption, and deterministic
//! synthetic corpora for self-contained runs.

pub mod augment;
pub mod cifar;
pub mod images;
pub mod noise;
pub mod synth;

pub use augment::{hflip, random_flip_shift, shift};
pub use cifar::{load_labeled, LabeledImages, Split};
pub use images::{center_crop_resize, load_image, load_image_folder, save_png, save_ppm};
pub use noise::{corrupt, corrupt_pairs, NoiseConfig};
