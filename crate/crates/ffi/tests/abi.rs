use std::ffi::{c_char, CStr, CString};
use std::ptr;

use eal_ffi::*;

fn parse(src: &str) -> *mut EalProgram {
    let src = CString::new(src).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { eal_program_parse(src.as_ptr(), &mut p) },
        EalStatus::Ok,
        "{}",
        last_error()
    );
    p
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(eal_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn take(s: *mut c_char) -> String {
    let out = unsafe { CStr::from_ptr(s) }.to_string_lossy().into_owned();
    unsafe { eal_string_free(s) };
    out
}

const EXAMPLE2: &str =
    "region r : 0 of !((1 -o 1) -o 1);\n(let !x = get(r) in set(r, !x)) | r <= !(\\(x : 1 -o 1). x *)";

#[test]
fn depth_type_and_run() {
    let p = parse(EXAMPLE2);
    let mut d = 99;
    assert_eq!(unsafe { eal_program_check_depth(p, 0, &mut d) }, EalStatus::Ok);
    assert_eq!(d, 1);
    let mut ty = ptr::null_mut();
    assert_eq!(unsafe { eal_program_type(p, 0, &mut ty) }, EalStatus::Ok);
    assert_eq!(take(ty), "1");
    let (mut steps, mut fin) = (0usize, ptr::null_mut());
    assert_eq!(
        unsafe { eal_program_run(p, EalSchedule::Deterministic, 0, 100, &mut steps, &mut fin) },
        EalStatus::Ok
    );
    assert_eq!(steps, 2);
    assert!(take(fin).starts_with("* | r <= "));
    let (mut longest, mut finals) = (0usize, ptr::null_mut());
    assert_eq!(
        unsafe { eal_program_run(p, EalSchedule::Exhaustive, 0, 1000, &mut longest, &mut finals) },
        EalStatus::Ok
    );
    assert!(longest >= 2);
    assert!(!take(finals).is_empty());
    unsafe { eal_program_free(p) };
}

#[test]
fn verdicts_map_to_status_codes() {
    let src = CString::new("\\x. (").unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { eal_program_parse(src.as_ptr(), &mut p) }, EalStatus::Syntax);
    assert!(p.is_null());
    assert!(!last_error().is_empty());

    let bad = parse("var z : 2;\n\\x. let !y = x in !(y !(y z))");
    let mut d = 0;
    assert_eq!(unsafe { eal_program_check_depth(bad, 0, &mut d) }, EalStatus::IllFormed);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { eal_program_bound(bad, &mut json) }, EalStatus::IllFormed);
    unsafe { eal_program_free(bad) };

    let deadlock = parse("let !y = (\\(x : 1). x) in !(y y)");
    let mut ty = ptr::null_mut();
    assert_eq!(unsafe { eal_program_type(deadlock, 0, &mut ty) }, EalStatus::IllTyped);
    assert!(!last_error().is_empty());
    unsafe { eal_program_free(deadlock) };
}

#[test]
fn null_arguments_are_rejected() {
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { eal_program_parse(ptr::null(), &mut p) },
        EalStatus::InvalidArgument
    );
    let mut d = 0;
    assert_eq!(
        unsafe { eal_program_check_depth(ptr::null(), 0, &mut d) },
        EalStatus::InvalidArgument
    );
    let q = parse("*");
    assert_eq!(
        unsafe { eal_program_check_depth(q, 0, ptr::null_mut()) },
        EalStatus::InvalidArgument
    );
    unsafe {
        eal_program_free(q);
        eal_program_free(ptr::null_mut());
        eal_string_free(ptr::null_mut());
    }
}

#[test]
fn budget_and_bound() {
    let p = parse("region r : 0 of !((1 -o 1) -o 1);\n(let !x = get(r) in set(r, !x)) | r <= !(\\(x : 1 -o 1). x *)");
    let (mut steps, mut fin) = (0usize, ptr::null_mut());
    assert_eq!(
        unsafe { eal_program_run(p, EalSchedule::Seeded, 3, 1, &mut steps, &mut fin) },
        EalStatus::Budget
    );
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { eal_program_bound(p, &mut json) }, EalStatus::Ok);
    let v: serde_json::Value = serde_json::from_str(&take(json)).unwrap();
    assert_eq!(v["alpha"], 1);
    unsafe { eal_program_free(p) };
}

#[test]
fn numerals_decode() {
    let mut n = 0;
    let t = CString::new("#3").unwrap();
    assert_eq!(
        unsafe { eal_decode_numeral(t.as_ptr(), 0, &mut n) },
        EalStatus::Ok,
        "{}",
        last_error()
    );
    assert_eq!(n, 3);
    let t = CString::new("*").unwrap();
    assert_eq!(
        unsafe { eal_decode_numeral(t.as_ptr(), 0, &mut n) },
        EalStatus::InvalidArgument
    );
}

#[test]
fn print_round_trips() {
    let p = parse(EXAMPLE2);
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { eal_program_print(p, &mut s) }, EalStatus::Ok);
    let printed = take(s);
    let q = parse(&printed);
    let mut s2 = ptr::null_mut();
    assert_eq!(unsafe { eal_program_print(q, &mut s2) }, EalStatus::Ok);
    assert_eq!(take(s2), printed);
    unsafe {
        eal_program_free(p);
        eal_program_free(q);
    }
}

#[test]
fn header_declares_the_abi() {
    let h = include_str!("../include/eal.h");
    for sym in [
        "eal_program_parse",
        "eal_program_free",
        "eal_program_check_depth",
        "eal_program_type",
        "eal_program_run",
        "eal_program_bound",
        "eal_decode_numeral",
        "eal_string_free",
        "eal_last_error",
        "EAL_STATUS_ILL_TYPED",
        "typedef struct EalProgram EalProgram",
    ] {
        assert!(h.contains(sym), "{sym}");
    }
}
