//! Label inventories: the TACRED relation set, the personal-data entity types
//! and the mappings between relation labels, fine types and coarse types.

use std::collections::BTreeSet;

pub const NO_RELATION: &str = "no_relation";

/// The 41 TACRED relation labels (excluding `no_relation`).
pub const TACRED_RELATIONS: [&str; 41] = [
    "org:alternate_names",
    "org:city_of_headquarters",
    "org:country_of_headquarters",
    "org:dissolved",
    "org:founded",
    "org:founded_by",
    "org:member_of",
    "org:members",
    "org:number_of_employees/members",
    "org:parents",
    "org:political/religious_affiliation",
    "org:shareholders",
    "org:stateorprovince_of_headquarters",
    "org:subsidiaries",
    "org:top_members/employees",
    "org:website",
    "per:age",
    "per:alternate_names",
    "per:cause_of_death",
    "per:charges",
    "per:children",
    "per:cities_of_residence",
    "per:city_of_birth",
    "per:city_of_death",
    "per:countries_of_residence",
    "per:country_of_birth",
    "per:country_of_death",
    "per:date_of_birth",
    "per:date_of_death",
    "per:employee_of",
    "per:origin",
    "per:other_family",
    "per:parents",
    "per:religion",
    "per:schools_attended",
    "per:siblings",
    "per:spouse",
    "per:stateorprovince_of_birth",
    "per:stateorprovince_of_death",
    "per:stateorprovinces_of_residence",
    "per:title",
];

/// The 34 personal-data entity types used as fine types and attribute keys.
pub const PERSONAL_ENTITY_TYPES: [&str; 34] = [
    "age",
    "alternate_name",
    "cause_of_death",
    "charges",
    "children",
    "city_of_birth",
    "city_of_death",
    "country_of_birth",
    "country_of_death",
    "date",
    "date_of_birth",
    "date_of_death",
    "educated_at",
    "email",
    "employee_of",
    "ethnicity",
    "gender",
    "location",
    "name",
    "nationality",
    "organization",
    "origin",
    "other_family",
    "parent",
    "phone",
    "religion",
    "residence",
    "school",
    "sibling",
    "spouse",
    "state_of_birth",
    "state_of_death",
    "title",
    "url",
];

/// Relations whose both endpoints are persons.
pub const PERSON_PERSON_RELATIONS: [&str; 5] = [
    "per:children",
    "per:other_family",
    "per:parents",
    "per:siblings",
    "per:spouse",
];

pub fn default_relation_inventory() -> BTreeSet<String> {
    TACRED_RELATIONS.iter().map(|s| s.to_string()).collect()
}

pub fn personal_entity_types() -> BTreeSet<String> {
    PERSONAL_ENTITY_TYPES.iter().map(|s| s.to_string()).collect()
}

pub fn is_personal_entity_type(t: &str) -> bool {
    PERSONAL_ENTITY_TYPES.contains(&t)
}

pub fn is_person_person(relation: &str) -> bool {
    PERSON_PERSON_RELATIONS.contains(&relation)
}

pub fn is_person_rooted(relation: &str) -> bool {
    relation.starts_with("per:")
}

/// Attribute key under which the object of a person-rooted relation is stored.
pub fn relation_attribute(relation: &str) -> Option<&'static str> {
    Some(match relation {
        "per:age" => "age",
        "per:alternate_names" => "alternate_name",
        "per:cause_of_death" => "cause_of_death",
        "per:charges" => "charges",
        "per:children" => "children",
        "per:cities_of_residence"
        | "per:countries_of_residence"
        | "per:stateorprovinces_of_residence" => "residence",
        "per:city_of_birth" => "city_of_birth",
        "per:city_of_death" => "city_of_death",
        "per:country_of_birth" => "country_of_birth",
        "per:country_of_death" => "country_of_death",
        "per:date_of_birth" => "date_of_birth",
        "per:date_of_death" => "date_of_death",
        "per:employee_of" => "employee_of",
        "per:origin" => "origin",
        "per:other_family" => "other_family",
        "per:parents" => "parent",
        "per:religion" => "religion",
        "per:schools_attended" => "school",
        "per:siblings" => "sibling",
        "per:spouse" => "spouse",
        "per:stateorprovince_of_birth" => "state_of_birth",
        "per:stateorprovince_of_death" => "state_of_death",
        "per:title" => "title",
        _ => return None,
    })
}

/// Coarse (NER-level) type of a fine personal-data type.
pub fn coarse_type_of(fine: &str) -> &'static str {
    match fine {
        "name" | "alternate_name" | "spouse" | "sibling" | "parent" | "children"
        | "other_family" => "PERSON",
        "organization" | "employee_of" => "ORGANIZATION",
        "school" | "educated_at" => "ORGANIZATION",
        "location" | "residence" | "city_of_birth" | "city_of_death" => "CITY",
        "country_of_birth" | "country_of_death" | "nationality" | "origin" => "COUNTRY",
        "state_of_birth" | "state_of_death" => "STATE_OR_PROVINCE",
        "date" | "date_of_birth" | "date_of_death" => "DATE",
        "age" => "NUMBER",
        "religion" => "RELIGION",
        "title" => "TITLE",
        "cause_of_death" => "CAUSE_OF_DEATH",
        "charges" => "CRIMINAL_CHARGE",
        "email" => "EMAIL",
        "url" => "URL",
        "phone" => "PHONE",
        "ethnicity" => "NATIONALITY",
        "gender" => "MISC",
        _ => "MISC",
    }
}

/// Relation that reads the same edge from the other endpoint, if any.
/// `per:spouse` is its own converse; `per:parents` and `per:children` swap.
pub fn converse_relation(relation: &str) -> Option<&'static str> {
    match relation {
        "per:spouse" => Some("per:spouse"),
        "per:siblings" => Some("per:siblings"),
        "per:other_family" => Some("per:other_family"),
        "per:parents" => Some("per:children"),
        "per:children" => Some("per:parents"),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Numeric,
    Categorical,
    /// Free text such as identifiers; dropped before encoding.
    Text,
}

pub fn attribute_kind(fine: &str) -> AttributeKind {
    match fine {
        "age" => AttributeKind::Numeric,
        "name" | "alternate_name" | "email" | "url" | "phone" => AttributeKind::Text,
        _ => AttributeKind::Categorical,
    }
}

/// Fine type for a span taken directly from a dataset record.
pub fn fine_type_for_dataset_span(coarse: &str, relation: Option<&str>) -> &'static str {
    if coarse == "PERSON" {
        return "name";
    }
    if let Some(attr) = relation.and_then(relation_attribute) {
        return attr;
    }
    match coarse {
        "ORGANIZATION" => "organization",
        "CITY" | "LOCATION" | "STATE_OR_PROVINCE" | "COUNTRY" => "location",
        "DATE" => "date",
        "NUMBER" | "DURATION" => "age",
        "RELIGION" => "religion",
        "TITLE" => "title",
        "CAUSE_OF_DEATH" => "cause_of_death",
        "CRIMINAL_CHARGE" => "charges",
        "NATIONALITY" => "nationality",
        "URL" => "url",
        "EMAIL" => "email",
        _ => "name",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inventory_sizes() {
        assert_eq!(default_relation_inventory().len(), 41);
        assert_eq!(personal_entity_types().len(), 34);
    }

    #[test]
    fn every_attribute_key_is_a_personal_type() {
        for r in TACRED_RELATIONS.iter().filter(|r| r.starts_with("per:")) {
            let attr = relation_attribute(r).expect("person relation maps to attribute");
            assert!(is_personal_entity_type(attr), "{attr}");
        }
        assert!(relation_attribute("org:founded").is_none());
    }
}
