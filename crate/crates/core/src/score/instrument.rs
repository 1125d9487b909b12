/// Canonical instrument class for a printed part name.
///
/// Instance numbers (arabic or roman), transposition suffixes ("in F") and
/// punctuation are dropped, then the remainder is looked up in a synonym
/// table covering the usual English, Italian, German and French orchestral
/// names. Unknown instruments fall back to the cleaned name.
pub fn instrument_class(part_name: &str) -> String {
    let lowered = part_name.trim().to_lowercase();
    let raw: Vec<String> = lowered
        .split(|c: char| c.is_whitespace() || c == '-' || c == '_')
        .map(|t| {
            t.trim_matches(|c: char| !c.is_alphanumeric() && c != '\'')
                .to_string()
        })
        .filter(|t| !t.is_empty())
        .collect();

    let mut tokens: Vec<String> = Vec::new();
    let mut i = 0;
    while i < raw.len() {
        let t = &raw[i];
        if t == "in" && raw.get(i + 1).is_some_and(|k| is_key_name(k)) {
            i += 2;
            continue;
        }
        let numbering = t.chars().all(|c| c.is_ascii_digit())
            || t.chars().all(|c| c.is_ascii_digit() || c == '/' || c == '.')
            || (!tokens.is_empty() && is_roman(t))
            || t == "&"
            || t == "and";
        if !numbering {
            let cleaned: String = t
                .chars()
                .filter(|c| c.is_alphabetic() || *c == '\'')
                .collect();
            if !cleaned.is_empty() {
                tokens.push(cleaned);
            }
        }
        i += 1;
    }

    let joined = tokens.join(" ");
    if let Some(class) = lookup(&joined) {
        return class.to_string();
    }
    if let Some(class) = tokens.iter().find_map(|t| lookup(t)) {
        return class.to_string();
    }
    if joined.is_empty() {
        lowered
    } else {
        joined
    }
}

fn is_roman(t: &str) -> bool {
    const NUMERALS: [&str; 12] = [
        "i", "ii", "iii", "iv", "v", "vi", "vii", "viii", "ix", "x", "xi", "xii",
    ];
    NUMERALS.contains(&t)
}

fn is_key_name(t: &str) -> bool {
    let t = t.trim_end_matches(['b', '#', '♭', '♯']);
    matches!(
        t,
        "a" | "b" | "c" | "d" | "e" | "f" | "g" | "es" | "bes" | "b-flat" | "e-flat" | "sib"
            | "mib" | "fa" | "do" | "re" | "la"
    )
}

fn lookup(name: &str) -> Option<&'static str> {
    Some(match name {
        "piccolo" | "flauto piccolo" | "ottavino" | "kleine flöte" | "picc" => "piccolo",
        "flute" | "flutes" | "flauto" | "flauti" | "flöte" | "flöten" | "fl" | "flûte" => {
            "flute"
        }
        "oboe" | "oboes" | "oboi" | "hautbois" | "ob" => "oboe",
        "english horn" | "cor anglais" | "corno inglese" | "englischhorn" => "english horn",
        "clarinet" | "clarinets" | "clarinetto" | "clarinetti" | "klarinette" | "klarinetten"
        | "clarinette" | "cl" | "clar" => "clarinet",
        "bass clarinet" | "clarinetto basso" | "bassklarinette" => "bass clarinet",
        "bassoon" | "bassoons" | "fagotto" | "fagotti" | "fagott" | "fagotte" | "basson"
        | "bsn" | "fg" => "bassoon",
        "contrabassoon" | "contrafagotto" | "kontrafagott" | "double bassoon" => {
            "contrabassoon"
        }
        "horn" | "horns" | "corno" | "corni" | "hörner" | "french horn" | "cor" | "cors"
        | "hn" => "horn",
        "trumpet" | "trumpets" | "tromba" | "trombe" | "trompete" | "trompeten" | "trompette"
        | "tpt" => "trumpet",
        "trombone" | "trombones" | "tromboni" | "posaune" | "posaunen" | "tbn" => "trombone",
        "tuba" | "tubas" => "tuba",
        "timpani" | "timpano" | "pauken" | "pauke" | "timbales" | "timp" => "timpani",
        "harp" | "arpa" | "harfe" | "harpe" => "harp",
        "piano" | "pianoforte" | "klavier" => "piano",
        "violin" | "violins" | "violino" | "violini" | "violine" | "violinen" | "violon"
        | "violons" | "vl" | "vln" | "vn" => "violin",
        "viola" | "violas" | "viole" | "bratsche" | "bratschen" | "vla" => {
            "viola"
        }
        "cello" | "cellos" | "celli" | "violoncello" | "violoncelli" | "violoncelle" | "vc" => {
            "cello"
        }
        "double bass" | "double basses" | "contrabass" | "contrabasso" | "contrabassi"
        | "kontrabass" | "kontrabässe" | "contrebasse" | "basses" | "cb" | "db" => "double bass",
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbered_oboes_share_a_class() {
        assert_eq!(instrument_class("Oboe I"), "oboe");
        assert_eq!(instrument_class("Oboe 2"), "oboe");
        assert_eq!(instrument_class("Oboi"), "oboe");
        assert_eq!(instrument_class("oboe"), "oboe");
        assert_eq!(instrument_class("Oboe 1/2"), "oboe");
    }

    #[test]
    fn string_sections() {
        assert_eq!(instrument_class("Violini I"), "violin");
        assert_eq!(instrument_class("Violin II"), "violin");
        assert_eq!(instrument_class("Violoncello"), "cello");
        assert_eq!(instrument_class("Kontrabass"), "double bass");
    }

    #[test]
    fn transposition_suffix_is_ignored() {
        assert_eq!(instrument_class("Horn in F 1"), "horn");
        assert_eq!(instrument_class("Clarinet in Bb"), "clarinet");
        assert_eq!(instrument_class("Trumpet in C II"), "trumpet");
    }

    #[test]
    fn unknown_names_fall_back_to_cleaned_text() {
        assert_eq!(instrument_class("Theremin 2"), "theremin");
        assert_eq!(instrument_class("  Glass Harmonica III. "), "glass harmonica");
    }
}
