pub mod stepped;
