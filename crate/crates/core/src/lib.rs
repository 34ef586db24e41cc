// SPDX-License-Identifier: Apache-2.0

pub mod attention;
pub mod bacam;
pub mod bimv;
pub mod bitcore;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod perfmodel;

pub use error::{Error, Result};
