//! Text formats: reaction networks and chemical formulas.

mod formula;
mod network;

pub use formula::{is_element, parse_formula, Composition, FormulaError};
pub(crate) use network::format_side;
pub use network::{
    parse_document, parse_network, parse_step_list, serialize_network, NetworkDocument, ParseError, ParseErrorKind,
    ReactionLine,
};
