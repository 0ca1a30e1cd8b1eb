//! Text handling, corpus records, file formats and the synthetic world.

mod dictionary;
mod io;
mod tokenize;
mod vocab;
mod world;

pub use dictionary::{translate_tokens, translate_train_augment, BilingualDictionary};
pub use io::{
    read_image_text_file, read_rating_file, read_translation_file, write_image_text_file,
    write_jsonl, write_rating_file, write_translation_file,
};
pub use tokenize::tokenize;
pub use vocab::{build_vocab, Vocabulary, OOV_TOKEN};
pub use world::{
    generate_world, image_id, SyntheticWorld, SyntheticWorldConfig, EVAL_I2T_FILE, RATINGS_FILE, TRAIN_I2T_FILE,
    TRAIN_T2T_FILE,
};

use serde::{Deserialize, Serialize};

/// An image (as a feature vector) paired with one caption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageTextExample {
    pub image_id: String,
    #[serde(deserialize_with = "io::deserialize_features")]
    pub features: Vec<f64>,
    pub caption: String,
    pub lang: String,
}

impl ImageTextExample {
    /// Identifier of this example's caption when referenced from a rating file.
    pub fn text_id(&self) -> String {
        text_ref_id(&self.image_id, &self.lang)
    }
}

/// Caption reference id used by rating files: `<image_id>:<lang>`.
pub fn text_ref_id(image_id: &str, lang: &str) -> String {
    format!("{image_id}:{lang}")
}

/// A pair of sentences with the same meaning in two languages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationExample {
    pub left: String,
    pub left_lang: String,
    pub right: String,
    pub right_lang: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Image,
    Text,
}

/// One line of a rating file: a human-style similarity score for two items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub a_type: Modality,
    pub a_id: String,
    pub b_type: Modality,
    pub b_id: String,
    pub score: f64,
}
