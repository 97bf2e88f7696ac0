//! Hosts the `acceptance` test target; the checks themselves live in
//! `kdvlab::acceptance`.
