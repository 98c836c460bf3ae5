//! Entity-labeled topic models.
//!
//! Documents are tokenized ([`corpus`]), their entity mentions linked and
//! filtered ([`linking`]), each document's most distinctive entities chosen
//! by tf-idf ([`labels`]), and Standard and Labeled LDA fit by collapsed
//! Gibbs sampling ([`inference`]). [`report`] renders the per-document
//! comparison and [`pipeline`] runs the stages from one configuration file.

pub mod corpus;
pub mod inference;
pub mod labels;
pub mod linking;
pub mod pipeline;
pub mod report;
pub mod tsv;
