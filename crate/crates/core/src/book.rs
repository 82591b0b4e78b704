//! Compiles the guide's code samples as doctests so the book cannot drift
//! from the library. Chapters are added here as they gain runnable
//! snippets.

#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }

    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(capture_format, "../../../book/src/capture-format.md");
    chapter!(filtering, "../../../book/src/filtering.md");
    chapter!(features, "../../../book/src/features.md");
    chapter!(normalization, "../../../book/src/normalization.md");
    chapter!(networks, "../../../book/src/networks.md");
    chapter!(experiments, "../../../book/src/experiments.md");
    chapter!(synthetic_data, "../../../book/src/synthetic-data.md");
    chapter!(cli, "../../../book/src/cli.md");
}
