// SPDX-License-Identifier: MIT OR Apache-2.0

// mdbook cannot run its own snippets against this workspace, so each chapter
// is pulled in as the docs of an empty module and `cargo test --doc` runs the
// code blocks. One module per chapter keeps failures traceable to a file.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}
#[doc = include_str!("../../../book/src/detection.md")]
pub mod detection {}
#[doc = include_str!("../../../book/src/refinement.md")]
pub mod refinement {}
#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
