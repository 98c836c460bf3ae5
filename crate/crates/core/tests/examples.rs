macro_rules! smoke {
    ($name:ident, $file:literal) => {
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));

            #[test]
            fn runs() {
                run().unwrap();
            }
        }
    };
}

smoke!(tokenize_corpus, "tokenize_corpus.rs");
smoke!(gazetteer_linking, "gazetteer_linking.rs");
smoke!(spotlight_client, "spotlight_client.rs");
smoke!(tfidf_labels, "tfidf_labels.rs");
smoke!(labeled_lda, "labeled_lda.rs");
smoke!(standard_lda, "standard_lda.rs");
smoke!(pipeline_report, "pipeline_report.rs");
