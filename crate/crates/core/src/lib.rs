//! Desk-scale pipeline for classifying social-network posts as
//! pro-inflationary vs. disinflationary: corpus filtering, trend labeling
//! from a monthly inflation series, TF-IDF baselines, a small transformer
//! encoder trained from scratch, and Shapley token attribution.

pub mod attribution;
pub mod baselines;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod evalkit;
pub mod fixtures;
pub mod labeler;
pub mod month;
pub mod svg;
pub mod vectorizer;

pub use error::{Error, Result};
pub use month::Month;
