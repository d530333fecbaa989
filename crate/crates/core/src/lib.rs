pub mod bilevel;
pub mod cli;
pub mod conic;
pub mod farkas;
pub mod lowerlevel;
pub mod poly;
pub mod sos;
pub mod uncertainty;
