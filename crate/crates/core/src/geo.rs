//! Country lookup from phone numbers, flag emoji and number masking.

/// ITU calling code → ISO 3166 alpha-2. Longest prefix wins.
const CALLING_CODES: &[(&str, &str)] = &[
    ("1", "US"),
    ("7", "RU"),
    ("20", "EG"),
    ("27", "ZA"),
    ("30", "GR"),
    ("31", "NL"),
    ("33", "FR"),
    ("34", "ES"),
    ("39", "IT"),
    ("44", "GB"),
    ("49", "DE"),
    ("52", "MX"),
    ("55", "BR"),
    ("60", "MY"),
    ("61", "AU"),
    ("62", "ID"),
    ("63", "PH"),
    ("81", "JP"),
    ("82", "KR"),
    ("86", "CN"),
    ("90", "TR"),
    ("91", "IN"),
    ("92", "PK"),
    ("93", "AF"),
    ("94", "LK"),
    ("98", "IR"),
    ("211", "SS"),
    ("212", "MA"),
    ("213", "DZ"),
    ("216", "TN"),
    ("218", "LY"),
    ("233", "GH"),
    ("234", "NG"),
    ("249", "SD"),
    ("251", "ET"),
    ("254", "KE"),
    ("255", "TZ"),
    ("256", "UG"),
    ("880", "BD"),
    ("962", "JO"),
    ("964", "IQ"),
    ("965", "KW"),
    ("966", "SA"),
    ("968", "OM"),
    ("971", "AE"),
    ("974", "QA"),
    ("977", "NP"),
];

/// ISO code used when the number prefix is not recognised.
pub const UNKNOWN_COUNTRY: &str = "ZZ";

fn digits(address: &str) -> Option<&str> {
    let d = address.strip_prefix('+').unwrap_or(address);
    (!d.is_empty() && d.bytes().all(|b| b.is_ascii_digit())).then_some(d)
}

/// Returns `(calling code, ISO code)` for a phone number, if recognised.
pub fn lookup(address: &str) -> Option<(&'static str, &'static str)> {
    let d = digits(address)?;
    CALLING_CODES
        .iter()
        .filter(|(code, _)| d.starts_with(code))
        .max_by_key(|(code, _)| code.len())
        .map(|&(code, iso)| (code, iso))
}

/// ISO country of a user address. Sandbox ids may carry the country as
/// `sandbox-<ISO>-<name>`.
pub fn country_of(address: &str) -> String {
    if let Some(rest) = address.strip_prefix("sandbox-") {
        if let Some((iso, _)) = rest.split_once('-') {
            if iso.len() == 2 && iso.bytes().all(|b| b.is_ascii_uppercase()) {
                return iso.to_string();
            }
        }
        return UNKNOWN_COUNTRY.to_string();
    }
    lookup(address)
        .map(|(_, iso)| iso.to_string())
        .unwrap_or_else(|| UNKNOWN_COUNTRY.to_string())
}

/// Regional-indicator flag for an ISO alpha-2 code.
pub fn flag(iso: &str) -> String {
    let b = iso.as_bytes();
    if iso == UNKNOWN_COUNTRY || b.len() != 2 || !b.iter().all(u8::is_ascii_uppercase) {
        return "🌐".to_string();
    }
    b.iter()
        .map(|c| char::from_u32(0x1F1E6 + u32::from(c - b'A')).unwrap_or('?'))
        .collect()
}

const MASK: &str = "•••••";

/// Masks everything except the calling code and the last four digits,
/// e.g. `+15551234567` → `+1•••••4567`.
pub fn mask_address(address: &str) -> String {
    match digits(address) {
        Some(d) => {
            let prefix = lookup(address).map(|(c, _)| c).unwrap_or("");
            let rest = &d[prefix.len()..];
            let keep = rest.len().min(4);
            // Never reveal more than half of what follows the prefix.
            let keep = keep.min(rest.len() / 2);
            format!("+{prefix}{MASK}{}", &rest[rest.len() - keep..])
        }
        None => {
            let chars: Vec<char> = address.chars().collect();
            let keep = chars.len().min(4).min(chars.len() / 2);
            let tail: String = chars[chars.len() - keep..]
                .iter()
                .map(|c| if c.is_ascii_digit() { '•' } else { *c })
                .collect();
            format!("{MASK}{tail}")
        }
    }
}
