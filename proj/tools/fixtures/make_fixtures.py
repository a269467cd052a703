#!/usr/bin/env python3
"""Writes the desk-scale MultiWOZ 2.2 and SGD fixtures under data/.

System utterances use inline span markup, `{slot:Surface text}`, which is
expanded into the utterance plus the dataset's span annotations. Run from the
repository root:  python3 tools/fixtures/make_fixtures.py
"""
import json
import os
import re

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "..")
SPAN = re.compile(r"\{([a-z_\-]+):([^}]*)\}")


def expand(marked):
    out, spans, pos = "", [], 0
    for m in SPAN.finditer(marked):
        out += marked[pos:m.start()]
        start = len(out)
        out += m.group(2)
        spans.append({"slot": m.group(1), "start": start, "exclusive_end": len(out)})
        pos = m.end()
    out += marked[pos:]
    return out, spans


def write(path, obj):
    full = os.path.join(ROOT, path)
    os.makedirs(os.path.dirname(full), exist_ok=True)
    with open(full, "w") as f:
        json.dump(obj, f, indent=1, ensure_ascii=False)
        f.write("\n")


# ---------------------------------------------------------------------------
# MultiWOZ 2.2

WEEKDAYS = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"]
AREAS = ["centre", "east", "north", "south", "west"]
PRICES = ["cheap", "expensive", "moderate"]
COUNTS = [str(i) for i in range(1, 9)]


def slot(name, desc, values=None):
    s = {"name": name, "description": desc, "is_categorical": values is not None}
    if values is not None:
        s["possible_values"] = values
    return s


MWZ_SCHEMA = [
    {"service_name": "hotel", "description": "hotel reservations and vacation stays",
     "slots": [slot("hotel-pricerange", "price budget of the hotel", PRICES),
               slot("hotel-type", "what is the type of the hotel", ["guesthouse", "hotel"]),
               slot("hotel-parking", "whether the hotel has parking", ["free", "no", "yes"]),
               slot("hotel-bookday", "day of the hotel booking", WEEKDAYS),
               slot("hotel-bookpeople", "number of people for the hotel booking", COUNTS),
               slot("hotel-bookstay", "length of stay at the hotel", COUNTS),
               slot("hotel-stars", "star rating of the hotel", ["0", "1", "2", "3", "4", "5"]),
               slot("hotel-internet", "whether the hotel has internet", ["free", "no", "yes"]),
               slot("hotel-name", "name of the hotel"),
               slot("hotel-area", "area or place of the hotel", AREAS),
               slot("hotel-address", "address of the hotel"),
               slot("hotel-phone", "phone number of the hotel"),
               slot("hotel-postcode", "postal code of the hotel"),
               slot("hotel-ref", "reference number of the hotel booking")],
     "intents": [{"name": "find_hotel", "is_transactional": False, "required_slots": [],
                  "optional_slots": {k: "dontcare" for k in ["hotel-pricerange", "hotel-type", "hotel-parking",
                                                             "hotel-stars", "hotel-internet", "hotel-name", "hotel-area"]}},
                 {"name": "book_hotel", "is_transactional": True, "required_slots": [],
                  "optional_slots": {k: "dontcare" for k in ["hotel-bookday", "hotel-bookpeople", "hotel-bookstay",
                                                             "hotel-name"]}}]},
    {"service_name": "restaurant", "description": "find places to dine and whet your appetite",
     "slots": [slot("restaurant-pricerange", "price budget for the restaurant", PRICES),
               slot("restaurant-area", "area or place of the restaurant", AREAS),
               slot("restaurant-food", "the cuisine of the restaurant you are looking for"),
               slot("restaurant-name", "name of the restaurant"),
               slot("restaurant-bookday", "day of the restaurant booking", WEEKDAYS),
               slot("restaurant-bookpeople", "how many people for the restaurant reservation", COUNTS),
               slot("restaurant-booktime", "time of the restaurant booking"),
               slot("restaurant-address", "address of the restaurant"),
               slot("restaurant-phone", "phone number of the restaurant"),
               slot("restaurant-postcode", "postal code of the restaurant"),
               slot("restaurant-ref", "reference number of the restaurant booking")],
     "intents": [{"name": "find_restaurant", "is_transactional": False, "required_slots": [],
                  "optional_slots": {k: "dontcare" for k in ["restaurant-pricerange", "restaurant-area",
                                                             "restaurant-food", "restaurant-name"]}},
                 {"name": "book_restaurant", "is_transactional": True, "required_slots": [],
                  "optional_slots": {k: "dontcare" for k in ["restaurant-bookday", "restaurant-bookpeople",
                                                             "restaurant-booktime", "restaurant-name"]}}]},
    {"service_name": "attraction", "description": "find touristy stuff to do around you",
     "slots": [slot("attraction-area", "area to search for attractions", AREAS),
               slot("attraction-name", "name of the attraction"),
               slot("attraction-type", "type of the attraction",
                    ["architecture", "boat", "church", "cinema", "college", "concerthall", "entertainment",
                     "hotspot", "multiple sports", "museum", "nightclub", "park", "special", "swimmingpool",
                     "theatre"]),
               slot("attraction-entrancefee", "how much is the entrance fee"),
               slot("attraction-openhours", "open hours of the attraction"),
               slot("attraction-address", "address of the attraction"),
               slot("attraction-phone", "phone number of the attraction"),
               slot("attraction-postcode", "postal code of the attraction")],
     "intents": [{"name": "find_attraction", "is_transactional": False, "required_slots": [],
                  "optional_slots": {k: "dontcare" for k in ["attraction-area", "attraction-name",
                                                             "attraction-type"]}}]},
    {"service_name": "taxi", "description": "rent cheap cabs to avoid traffic",
     "slots": [slot("taxi-leaveat", "leaving time of taxi"),
               slot("taxi-destination", "destination of taxi"),
               slot("taxi-departure", "departure location of taxi"),
               slot("taxi-arriveby", "arrival time of taxi"),
               slot("taxi-type", "type of taxi car"),
               slot("taxi-phone", "phone number of the taxi")],
     "intents": [{"name": "book_taxi", "is_transactional": True, "required_slots": [],
                  "optional_slots": {k: "dontcare" for k in ["taxi-leaveat", "taxi-destination", "taxi-departure",
                                                             "taxi-arriveby"]}}]},
    {"service_name": "train", "description": "find trains that take you to places",
     "slots": [slot("train-arriveby", "arrival time of the train"),
               slot("train-departure", "departure location of the train"),
               slot("train-day", "day of the train", WEEKDAYS),
               slot("train-bookpeople", "how many train tickets you need", ["0"] + COUNTS),
               slot("train-leaveat", "leaving time for the train"),
               slot("train-destination", "destination of the train"),
               slot("train-trainid", "id of the train"),
               slot("train-ref", "reference number of the train booking"),
               slot("train-price", "price of the train"),
               slot("train-duration", "duration of the travel")],
     "intents": [{"name": "find_train", "is_transactional": False, "required_slots": [],
                  "optional_slots": {k: "dontcare" for k in ["train-arriveby", "train-departure", "train-day",
                                                             "train-leaveat", "train-destination"]}},
                 {"name": "book_train", "is_transactional": True, "required_slots": [],
                  "optional_slots": {"train-bookpeople": "dontcare"}}]},
    {"service_name": "bus", "description": "bus service for traveling",
     "slots": [slot("bus-departure", "departure location of bus"),
               slot("bus-destination", "destination of bus"),
               slot("bus-leaveat", "time the bus leaves"),
               slot("bus-day", "day to use the bus tickets", WEEKDAYS)],
     "intents": [{"name": "find_bus", "is_transactional": False, "required_slots": ["bus-departure", "bus-destination"],
                  "optional_slots": {"bus-leaveat": "dontcare", "bus-day": "dontcare"}}]},
    {"service_name": "hospital", "description": "making you feel better when you are ill",
     "slots": [slot("hospital-department", "type of medical care"),
               slot("hospital-address", "address of the hospital"),
               slot("hospital-phone", "phone number of the hospital"),
               slot("hospital-postcode", "postal code of the hospital")],
     "intents": [{"name": "find_hospital", "is_transactional": False, "required_slots": [],
                  "optional_slots": {"hospital-department": "dontcare"}}]},
    {"service_name": "police", "description": "police station",
     "slots": [slot("police-address", "address of the police station"),
               slot("police-phone", "phone number of the police station"),
               slot("police-postcode", "postal code of the police station"),
               slot("police-name", "name of the police station")],
     "intents": [{"name": "police", "is_transactional": False, "required_slots": [], "optional_slots": {}}]},
]

SERVICES = [s["service_name"] for s in MWZ_SCHEMA]
INTENT = {"hotel": "find_hotel", "restaurant": "find_restaurant", "attraction": "find_attraction",
          "taxi": "book_taxi", "train": "find_train", "hospital": "find_hospital", "police": "police", "bus": "find_bus"}


def hotel(name, area, price, typ, stars, parking, address, phone, postcode):
    return {"name": name, "area": area, "pricerange": price, "type": typ, "stars": stars, "parking": parking,
            "internet": "yes", "address": address, "phone": phone, "postcode": postcode}


HOTELS = [
    hotel("acorn guest house", "north", "moderate", "guesthouse", "4", "yes", "154 chesterton road", "01223353888", "cb41da"),
    hotel("alexander bed and breakfast", "centre", "cheap", "guesthouse", "4", "yes", "56 saint barnabas road", "01223525725", "cb12de"),
    hotel("allenbell", "east", "cheap", "guesthouse", "4", "yes", "517a coldham lane", "01223210353", "cb13js"),
    hotel("arbury lodge guesthouse", "north", "moderate", "guesthouse", "4", "yes", "82 arbury road", "01223364319", "cb42je"),
    hotel("ashley hotel", "north", "moderate", "hotel", "2", "yes", "74 chesterton road", "01223350059", "cb41er"),
    hotel("city centre north b and b", "north", "cheap", "guesthouse", "0", "yes", "328a histon road", "01223312843", "cb43ht"),
    hotel("el shaddai", "centre", "cheap", "guesthouse", "0", "no", "41 warkworth street", "01223327978", "cb11eg"),
    hotel("gonville hotel", "centre", "expensive", "hotel", "3", "yes", "gonville place", "01223366611", "cb11ly"),
    hotel("huntingdon marriott hotel", "west", "expensive", "hotel", "4", "yes",
          "kingfisher way, hinchinbrook business park, huntingdon", "01480446000", "pe296fl"),
    hotel("worth house", "north", "cheap", "guesthouse", "4", "yes", "152 chesterton road", "01223316074", "cb41da"),
    hotel("a and b guest house", "east", "moderate", "guesthouse", "4", "no", "124 tenison road", "01223315702", "cb12dp"),
    hotel("university arms hotel", "centre", "expensive", "hotel", "4", "no", "regent street", "01223351241", "cb21ad"),
    hotel("carolina bed and breakfast", "east", "moderate", "guesthouse", "4", "yes", "138 perne road", "01223247015", "cb13nx"),
]
HOTELS[6]["internet"] = "no"


def restaurant(name, area, price, food, address, phone, postcode):
    return {"name": name, "area": area, "pricerange": price, "food": food, "address": address, "phone": phone,
            "postcode": postcode}


RESTAURANTS = [
    restaurant("golden wok", "north", "moderate", "chinese", "191 histon road chesterton", "01223350688", "cb43hl"),
    restaurant("jinling noodle bar", "centre", "moderate", "chinese", "11 peas hill city centre", "01223566188", "cb23pp"),
    restaurant("charlie chan", "centre", "cheap", "chinese", "regent street city centre", "01223361763", "cb21db"),
    restaurant("pizza hut city centre", "centre", "cheap", "italian", "regent street city centre", "01223323737", "cb21ab"),
    restaurant("zizzi cambridge", "centre", "cheap", "italian", "47-53 regent street", "01223365599", "cb21ab"),
    restaurant("la margherita", "west", "cheap", "italian", "15 magdalene street city centre", "01223315232", "cb30af"),
    restaurant("the nirala", "north", "moderate", "indian", "7 milton road chesterton", "01223360966", "cb41uy"),
    restaurant("curry garden", "centre", "expensive", "indian", "106 regent street city centre", "01223302330", "cb21dp"),
    restaurant("midsummer house restaurant", "centre", "expensive", "british", "midsummer common", "01223369299", "cb41ha"),
    restaurant("the missing sock", "east", "cheap", "international", "finders corner newmarket road", "01223812660", "cb259aq"),
    restaurant("restaurant two two", "north", "expensive", "french", "22 chesterton road chesterton", "01223351880", "cb43ax"),
    restaurant("saffron brasserie", "centre", "expensive", "indian", "hills road city centre", "01223354679", "cb21la"),
]


def attraction(name, area, typ, fee, address, phone, postcode):
    return {"name": name, "area": area, "type": typ, "entrance fee": fee, "openhours": "?",
            "address": address, "phone": phone, "postcode": postcode}


ATTRACTIONS = [
    attraction("fitzwilliam museum", "centre", "museum", "free", "trumpington street", "01223332900", "cb21rb"),
    attraction("broughton house gallery", "centre", "museum", "free", "98 king street", "01223314960", "cb11ln"),
    attraction("cambridge and county folk museum", "west", "museum", "3.50 pounds", "2-3 castle street", "01223355159", "cb30aq"),
    attraction("kettle's yard", "west", "museum", "free", "castle street", "01223748100", "cb30aq"),
    attraction("king's college", "centre", "college", "free", "king's parade", "01223331100", "cb21st"),
    attraction("christ's college", "centre", "college", "free", "saint andrew's street", "01223334900", "cb23bu"),
    attraction("botanic gardens", "centre", "park", "4 pounds", "bateman street", "01223336265", "cb21jf"),
    attraction("adc theatre", "centre", "theatre", "?", "park street", "01223300085", "cb58as"),
    attraction("cherry hinton water play", "east", "park", "free", "cherry hinton hall, cherry hinton road east", "01223446100", "cb18dw"),
]


def train(tid, dep, dest, day, leave, arrive, duration, price):
    return {"trainID": tid, "departure": dep, "destination": dest, "day": day, "leaveAt": leave,
            "arriveBy": arrive, "duration": duration, "price": price}


TRAINS = [
    train("TR7075", "cambridge", "london kings cross", "monday", "05:00", "05:51", "51 minutes", "23.60 pounds"),
    train("TR2289", "cambridge", "london kings cross", "monday", "07:00", "07:51", "51 minutes", "23.60 pounds"),
    train("TR9536", "cambridge", "london kings cross", "monday", "09:00", "09:51", "51 minutes", "23.60 pounds"),
    train("TR3343", "cambridge", "london kings cross", "monday", "11:00", "11:51", "51 minutes", "23.60 pounds"),
    train("TR1750", "cambridge", "london kings cross", "monday", "13:00", "13:51", "51 minutes", "23.60 pounds"),
    train("TR5767", "london kings cross", "cambridge", "friday", "09:17", "10:08", "51 minutes", "23.60 pounds"),
    train("TR6755", "london kings cross", "cambridge", "friday", "11:17", "12:08", "51 minutes", "23.60 pounds"),
    train("TR3734", "london kings cross", "cambridge", "friday", "15:17", "16:08", "51 minutes", "23.60 pounds"),
    train("TR1534", "cambridge", "ely", "tuesday", "08:50", "09:07", "17 minutes", "4.40 pounds"),
    train("TR9933", "cambridge", "ely", "tuesday", "10:50", "11:07", "17 minutes", "4.40 pounds"),
    train("TR3810", "norwich", "cambridge", "sunday", "10:16", "11:35", "79 minutes", "14.08 pounds"),
    train("TR1240", "norwich", "cambridge", "sunday", "12:16", "13:35", "79 minutes", "14.08 pounds"),
]

POLICE = [{"name": "parkside police station", "address": "parkside, cambridge", "phone": "01223358966",
           "postcode": "cb11jg"}]
HOSPITAL = [{"department": "neurosciences", "address": "hills rd, cambridge", "phone": "01223216382", "postcode": "cb20qq"},
            {"department": "paediatric clinic", "address": "hills rd, cambridge", "phone": "01223217613", "postcode": "cb20qq"}]

# Each turn: (user text, active domain, {domain: new pairs}, requested slots, system markup, use spans)
MWZ_DIALOGUES = [
    ("SNG0001.json", "train", ["hotel"],
     {"hotel": {"info": {"pricerange": "cheap", "area": "north"}, "reqt": ["phone"],
                "book": {"people": "2", "day": "monday", "stay": "2"}}},
     [("I want a cheap place to stay.", "hotel", {"hotel": {"pricerange": "cheap"}}, [],
       "We have {hotel-choice:4} cheap places. Do you have an area in mind?"),
      ("Somewhere in the north, please.", "hotel", {"hotel": {"area": "north"}}, [],
       "{hotel-name:City Centre North B and B} is a cheap guesthouse in the north. Shall I book it?"),
      ("Yes, book it for 2 people for 2 nights starting monday.", "hotel",
       {"hotel": {"bookpeople": "2", "bookstay": "2", "bookday": "monday"}}, [],
       "Booking was successful. Your reference number is {hotel-ref:7GAWK763}."),
      ("What is their phone number?", "hotel", {}, ["hotel-phone"],
       "Their phone number is {hotel-phone:01223312843}.")]),
    ("SNG0002.json", "train", ["restaurant"],
     {"restaurant": {"info": {"food": "chinese", "area": "centre", "pricerange": "moderate"},
                     "reqt": ["address", "phone"]}},
     [("I am looking for a chinese restaurant in the centre.", "restaurant",
       {"restaurant": {"food": "chinese", "area": "centre"}}, [],
       "There are {restaurant-choice:2} chinese places in the centre. What price range would you like?"),
      ("A moderately priced one would be great.", "restaurant", {"restaurant": {"pricerange": "moderate"}}, [],
       "{restaurant-name:Jinling Noodle Bar} serves chinese food in the centre at a moderate price."),
      ("Could I have the address and phone number?", "restaurant", {}, ["restaurant-address", "restaurant-phone"],
       "Sure, the address is {restaurant-address:11 Peas Hill City Centre} and the phone number is "
       "{restaurant-phone:01223566188}.")]),
    ("SNG0003.json", "train", ["train"],
     {"train": {"info": {"departure": "cambridge", "destination": "london kings cross", "day": "monday",
                         "leaveAt": "09:00"}, "reqt": ["arriveBy", "price"], "book": {"people": "3"}}},
     [("I need a train from cambridge to london kings cross.", "train",
       {"train": {"departure": "cambridge", "destination": "london kings cross"}}, [],
       "What day would you like to travel?"),
      ("On monday, leaving after 09:00.", "train", {"train": {"day": "monday", "leaveat": "09:00"}}, [],
       "{train-trainid:TR9536} leaves at {train-leaveat:09:00} and arrives by {train-arriveby:09:51}. "
       "Would you like tickets?"),
      ("Yes, I need tickets for 3 people.", "train", {"train": {"bookpeople": "3"}}, [],
       "I booked 3 tickets. The total fee is {train-price:70.80 pounds} and your reference is {train-ref:UK8XPPYE}.")]),
    ("SNG0004.json", "train", ["attraction"],
     {"attraction": {"info": {"type": "museum", "area": "west"}, "reqt": ["entrance fee", "address"]}},
     [("Are there any museums in the west?", "attraction", {"attraction": {"type": "museum", "area": "west"}}, [],
       "Yes, {attraction-name:Cambridge and County Folk Museum} is in the west."),
      ("How much is the entrance fee and what is the address?", "attraction", {},
       ["attraction-entrancefee", "attraction-address"],
       "The entrance fee is {attraction-entrancefee:3.50 pounds} and it is at {attraction-address:2-3 Castle Street}.")]),
    ("SNG0005.json", "train", ["hotel"],
     {"hotel": {"info": {"pricerange": "expensive", "stars": "4", "parking": "yes"}, "reqt": ["address", "postcode"]}},
     [("I'm looking for an expensive hotel with 4 stars.", "hotel",
       {"hotel": {"pricerange": "expensive", "stars": "4"}}, [],
       "I have {hotel-choice:2} options. Do you need parking?"),
      ("Yes, free parking is a must.", "hotel", {"hotel": {"parking": "yes"}}, [],
       # no span annotation: the loader delexicalizes against the database
       "!Huntingdon Marriott Hotel is expensive, has 4 stars and offers parking."),
      ("Please give me the address and postcode.", "hotel", {}, ["hotel-address", "hotel-postcode"],
       "It is located at {hotel-address:Kingfisher Way, Hinchinbrook Business Park, Huntingdon}, "
       "postcode {hotel-postcode:PE296FL}.")]),
    ("SNG0006.json", "train", ["restaurant"],
     {"restaurant": {"info": {"food": "italian", "pricerange": "cheap", "area": "centre"}, "reqt": [],
                     "book": {"people": "4", "time": "18:00", "day": "friday"}}},
     [("Find me a cheap italian place to eat.", "restaurant",
       {"restaurant": {"food": "italian", "pricerange": "cheap"}}, [],
       "There are {restaurant-choice:3} options. Which part of town?"),
      ("The centre of town would be best.", "restaurant", {"restaurant": {"area": "centre"}}, [],
       "How about {restaurant-name:Pizza Hut City Centre}?"),
      ("Book a table for 4 at 18:00 on friday.", "restaurant",
       {"restaurant": {"bookpeople": "4", "booktime": "18:00", "bookday": "friday"}}, [],
       "Done. Your reference number is {restaurant-ref:F3K2PQZ9}.")]),
    ("SNG0007.json", "train", ["taxi"],
     {"taxi": {"info": {"departure": "pizza hut city centre", "destination": "kettle's yard", "leaveAt": "17:15"},
               "reqt": ["car type", "phone"]}},
     [("I need a taxi from pizza hut city centre to kettle's yard.", "taxi",
       {"taxi": {"departure": "pizza hut city centre", "destination": "kettle's yard"}}, [],
       "What time do you want to leave?"),
      ("I want to leave at 17:15.", "taxi", {"taxi": {"leaveat": "17:15"}}, ["taxi-type", "taxi-phone"],
       "Booked! A {taxi-type:white toyota} will pick you up. The contact number is {taxi-phone:07218068540}.")]),
    ("MUL0008.json", "train", ["hotel", "restaurant"],
     {"hotel": {"info": {"pricerange": "cheap", "type": "guesthouse", "area": "centre"}, "reqt": ["address"]},
      "restaurant": {"info": {"food": "indian", "pricerange": "expensive", "area": "centre"}, "reqt": ["phone"]}},
     [("I'm looking for a cheap guesthouse in the centre.", "hotel",
       {"hotel": {"pricerange": "cheap", "type": "guesthouse", "area": "centre"}}, [],
       "{hotel-name:Alexander Bed and Breakfast} is a cheap guesthouse in the centre."),
      ("What is the address of that guesthouse?", "hotel", {}, ["hotel-address"],
       "It is at {hotel-address:56 Saint Barnabas Road}."),
      ("I also want an expensive indian restaurant in the same area.", "restaurant",
       {"restaurant": {"food": "indian", "pricerange": "expensive", "area": "centre"}}, [],
       "{restaurant-name:Curry Garden} is an expensive indian place in the centre."),
      ("Great, can I get their phone number?", "restaurant", {}, ["restaurant-phone"],
       "The phone number is {restaurant-phone:01223302330}.")]),
    ("MUL0009.json", "test", ["restaurant", "taxi"],
     {"restaurant": {"info": {"food": "british", "area": "centre"}, "reqt": ["postcode"]},
      "taxi": {"info": {"departure": "christ's college", "destination": "midsummer house restaurant",
                        "arriveBy": "19:00"}, "reqt": ["car type"]}},
     [("Is there a british restaurant in the centre?", "restaurant",
       {"restaurant": {"food": "british", "area": "centre"}}, [],
       "{restaurant-name:Midsummer House Restaurant} is a british restaurant in the centre."),
      ("What is its postcode?", "restaurant", {}, ["restaurant-postcode"],
       "The postcode is {restaurant-postcode:CB41HA}."),
      ("I need a taxi from christ's college to the restaurant, arriving by 19:00.", "taxi",
       {"taxi": {"departure": "christ's college", "destination": "midsummer house restaurant", "arriveby": "19:00"}},
       [], "Your taxi is booked, it is a {taxi-type:red skoda}, contact number {taxi-phone:07362879251}.")]),
    ("SNG0010.json", "test", ["hotel"],
     {"hotel": {"info": {"area": "east", "pricerange": "moderate"}, "reqt": ["phone"]}},
     [("Hello, I need a moderately priced place to stay in the east.", "hotel",
       {"hotel": {"pricerange": "moderate", "area": "east"}}, [],
       "{hotel-name:A and B Guest House} is a moderately priced guesthouse in the east."),
      ("What is the phone number there?", "hotel", {}, ["hotel-phone"],
       "You can reach them at {hotel-phone:01223315702}.")]),
    ("MUL0011.json", "test", ["attraction", "train"],
     {"attraction": {"info": {"type": "college", "area": "centre"}, "reqt": ["entrance fee"]},
      "train": {"info": {"destination": "ely", "day": "tuesday", "departure": "cambridge", "arriveBy": "11:30"},
                "reqt": ["price"]}},
     [("I would like to visit a college in the centre.", "attraction",
       {"attraction": {"type": "college", "area": "centre"}}, [],
       "{attraction-name:King's College} is a college in the centre. Entrance is {attraction-entrancefee:free}."),
      ("I also need a train to ely on tuesday.", "train", {"train": {"destination": "ely", "day": "tuesday"}}, [],
       "Where will you depart from?"),
      ("From cambridge, and I need to arrive by 11:30.", "train",
       {"train": {"departure": "cambridge", "arriveby": "11:30"}}, [],
       "{train-trainid:TR1534} arrives at {train-arriveby:09:07}. The price is {train-price:4.40 pounds}.")]),
    ("SNG0012.json", "test", ["police"],
     {"police": {"info": {}, "reqt": ["phone", "address"]}},
     [("I was robbed and need the nearest police station.", "police", {}, [],
       "The {police-name:Parkside Police Station} is at {police-address:Parkside, Cambridge}."),
      ("Could I have their phone number too?", "police", {}, ["police-phone"],
       "The number is {police-phone:01223358966}.")]),
]

GOAL_TEXT = {
    "SNG0001.json": "You are looking for a cheap place to stay in the north. Book it for 2 people and 2 nights "
                    "starting from monday, and ask for the phone number.",
    "SNG0002.json": "You are looking for a moderately priced chinese restaurant in the centre. Ask for the "
                    "address and phone number.",
    "SNG0003.json": "You need a train from cambridge to london kings cross on monday, leaving after 09:00. Book "
                    "3 tickets and ask for the arrival time and price.",
    "SNG0004.json": "You want to visit a museum in the west. Ask for the entrance fee and address.",
    "SNG0005.json": "You are looking for an expensive 4 star hotel with parking. Ask for the address and postcode.",
    "SNG0006.json": "You want a cheap italian restaurant in the centre. Book a table for 4 people at 18:00 on friday.",
    "SNG0007.json": "You need a taxi from pizza hut city centre to kettle's yard leaving at 17:15. Ask for the car "
                    "type and contact number.",
    "MUL0008.json": "You are looking for a cheap guesthouse in the centre and want its address. You also want an "
                    "expensive indian restaurant in the same area and its phone number.",
    "MUL0009.json": "You want a british restaurant in the centre and its postcode. Then you need a taxi from "
                    "christ's college to the restaurant arriving by 19:00; ask for the car type.",
    "SNG0010.json": "You need a moderately priced place to stay in the east. Ask for the phone number.",
    "MUL0011.json": "You want to visit a college in the centre and ask for the entrance fee. You also need a train "
                    "from cambridge to ely on tuesday arriving by 11:30; ask for the price.",
    "SNG0012.json": "You were robbed and need the police station. Ask for the phone number and address.",
}


def mwz_dialogue(did, services, turns):
    out_turns, state = [], {s: {} for s in SERVICES}
    for i, (user, active, new_pairs, requested, system) in enumerate(turns):
        for d, pairs in new_pairs.items():
            for k, v in pairs.items():
                state[d][f"{d}-{k}"] = [v]
        frames = []
        for s in SERVICES:
            frames.append({"actions": [], "service": s, "slots": [],
                           "state": {"active_intent": INTENT[s] if s == active else "NONE",
                                     "requested_slots": [r for r in requested if r.startswith(s + "-")],
                                     "slot_values": dict(state[s])}})
        out_turns.append({"frames": frames, "speaker": "USER", "turn_id": str(2 * i), "utterance": user})
        use_spans = not system.startswith("!")
        text, spans = expand(system.lstrip("!"))
        sys_frames = []
        for s in SERVICES:
            sl = [sp for sp in spans if sp["slot"].startswith(s + "-")] if use_spans else []
            for sp in sl:
                sp["value"] = text[sp["start"]:sp["exclusive_end"]]
            sys_frames.append({"actions": [], "service": s, "slots": sl})
        out_turns.append({"frames": sys_frames, "speaker": "SYSTEM", "turn_id": str(2 * i + 1), "utterance": text})
    return {"dialogue_id": did, "services": services, "turns": out_turns}


def make_multiwoz():
    base = "data/multiwoz"
    write(f"{base}/schema.json", MWZ_SCHEMA)
    write(f"{base}/db/hotel_db.json", HOTELS)
    write(f"{base}/db/restaurant_db.json", RESTAURANTS)
    write(f"{base}/db/attraction_db.json", ATTRACTIONS)
    write(f"{base}/db/train_db.json", TRAINS)
    write(f"{base}/db/police_db.json", POLICE)
    write(f"{base}/db/hospital_db.json", HOSPITAL)
    splits, goals = {"train": [], "test": []}, {}
    for did, split, services, goal, turns in MWZ_DIALOGUES:
        splits[split].append(mwz_dialogue(did, services, turns))
        g = {d: {} for d in ["taxi", "police", "hospital", "hotel", "attraction", "train", "restaurant"]}
        g.update(goal)
        g["message"] = [GOAL_TEXT[did]]
        goals[did] = g
    for split, dialogues in splits.items():
        write(f"{base}/{split}/dialogues_001.json", dialogues)
    write(f"{base}/goals.json", goals)


# ---------------------------------------------------------------------------
# SGD

SGD_SCHEMA = [
    {"service_name": "Restaurants_1", "description": "A leading provider for restaurant search and reservations",
     "slots": [slot("restaurant_name", "Name of the restaurant"),
               slot("date", "Date for the reservation or to find availability"),
               slot("time", "Time for the reservation or to find availability"),
               slot("serves_alcohol", "Boolean flag indicating if the restaurant serves alcohol", ["True", "False"]),
               slot("has_live_music", "Boolean flag indicating if the restaurant has live music", ["True", "False"]),
               slot("phone_number", "Phone number to contact restaurant"),
               slot("street_address", "Address of restaurant"),
               slot("party_size", "Party size for a reservation", ["1", "2", "3", "4", "5", "6"]),
               slot("price_range", "Price range for the restaurant",
                    ["inexpensive", "moderate", "expensive", "very expensive"]),
               slot("city", "City in which the restaurant is located"),
               slot("cuisine", "Cuisine of food served in the restaurant")],
     "intents": [{"name": "ReserveRestaurant", "is_transactional": True,
                  "required_slots": ["restaurant_name", "city", "time"],
                  "optional_slots": {"date": "2019-03-01", "party_size": "2"}},
                 {"name": "FindRestaurants", "is_transactional": False, "required_slots": ["city", "cuisine"],
                  "optional_slots": {"price_range": "dontcare", "has_live_music": "dontcare",
                                     "serves_alcohol": "dontcare"}}]},
    {"service_name": "Hotels_2", "description": "A popular service for searching and reserving houses for short term stay",
     "slots": [slot("where_to", "Location of the house"),
               slot("number_of_adults", "Number of people for the reservation", ["1", "2", "3", "4", "5"]),
               slot("check_in_date", "Start date for the reservation"),
               slot("check_out_date", "End date for the reservation"),
               slot("rating", "Review rating of the house"),
               slot("address", "Address of the house"),
               slot("phone_number", "Phone number of the house"),
               slot("total_price", "Total price for the reservation"),
               slot("has_laundry_service", "Whether the house has laundry service", ["True", "False"])],
     "intents": [{"name": "SearchHouse", "is_transactional": False, "required_slots": ["where_to"],
                  "optional_slots": {"has_laundry_service": "dontcare", "number_of_adults": "dontcare",
                                     "rating": "dontcare"}},
                 {"name": "BookHouse", "is_transactional": True,
                  "required_slots": ["where_to", "number_of_adults", "check_in_date", "check_out_date"],
                  "optional_slots": {}}]},
    {"service_name": "Movies_1", "description": "A go-to provider for finding movies, searching for show times and booking tickets",
     "slots": [slot("price", "Price of each movie ticket"),
               slot("number_of_tickets", "Number of tickets to buy", ["1", "2", "3", "4", "5", "6"]),
               slot("show_type", "Type of show", ["regular", "3d", "imax"]),
               slot("theater_name", "Name of the theatre"),
               slot("show_time", "Time of the show"),
               slot("show_date", "Date of the show"),
               slot("genre", "Genre of the movie"),
               slot("street_address", "Address of the theatre"),
               slot("location", "City where the theatre is located"),
               slot("movie_name", "Name of the movie")],
     "intents": [{"name": "FindMovies", "is_transactional": False, "required_slots": ["location"],
                  "optional_slots": {"theater_name": "dontcare", "genre": "dontcare", "show_type": "dontcare"}}]},
]

# (user text, service, {new pairs}, requested, intent, system markup, service results or None)
SGD_DIALOGUES = [
    ("1_00001", "train", ["Restaurants_1"], [
        ("I'm hungry, find me a restaurant in San Jose.", "Restaurants_1", {"city": "San Jose"}, [],
         "FindRestaurants", "What type of cuisine do you want?", None),
        ("I'd like some Mexican food.", "Restaurants_1", {"cuisine": "Mexican"}, [], "FindRestaurants",
         "There are 3 options. {restaurant_name:Agave} is a nice one in San Jose.",
         [{"restaurant_name": "Agave", "city": "San Jose", "cuisine": "Mexican", "phone_number": "408-555-0100",
           "street_address": "1 Market Street", "price_range": "moderate"},
          {"restaurant_name": "La Victoria", "city": "San Jose", "cuisine": "Mexican", "phone_number": "408-555-0101",
           "street_address": "140 East San Carlos Street", "price_range": "inexpensive"},
          {"restaurant_name": "Tacos Al Pastor", "city": "San Jose", "cuisine": "Mexican",
           "phone_number": "408-555-0102", "street_address": "400 Story Road", "price_range": "inexpensive"}]),
        ("What is their phone number?", "Restaurants_1", {}, ["phone_number"], "FindRestaurants",
         "Their number is {phone_number:408-555-0100}.", None)]),
    ("1_00002", "train", ["Hotels_2"], [
        ("I need a place to stay in Seattle.", "Hotels_2", {"where_to": "Seattle"}, [], "SearchHouse",
         "There is a nice house at {address:1234 Pine Street} with a {rating:4.5} rating.",
         [{"where_to": "Seattle", "address": "1234 Pine Street", "rating": "4.5", "phone_number": "206-555-0123",
           "has_laundry_service": "True"},
          {"where_to": "Seattle", "address": "77 Lake Avenue", "rating": "4.1", "phone_number": "206-555-0188",
           "has_laundry_service": "False"}]),
        ("It is for 2 adults. What is the phone number?", "Hotels_2", {"number_of_adults": "2"}, ["phone_number"],
         "SearchHouse", "The phone number is {phone_number:206-555-0123}.", None)]),
    ("1_00003", "train", ["Movies_1"], [
        ("Find me a movie to watch in Berkeley.", "Movies_1", {"location": "Berkeley"}, [], "FindMovies",
         "How about {movie_name:Hackers}?",
         [{"movie_name": "Hackers", "genre": "Drama", "theater_name": "California Theatre", "location": "Berkeley"},
          {"movie_name": "Dumbo", "genre": "Family", "theater_name": "UA Berkeley", "location": "Berkeley"}]),
        ("Is it a drama? At which theater?", "Movies_1", {}, ["genre", "theater_name"], "FindMovies",
         "It is a {genre:drama} playing at {theater_name:California Theatre}.", None)]),
    ("1_00004", "train", ["Restaurants_1"], [
        ("Find a cheap place to eat in Oakland.", "Restaurants_1", {"city": "Oakland", "price_range": "inexpensive"},
         [], "FindRestaurants", "What kind of food?", None),
        ("Thai food is good.", "Restaurants_1", {"cuisine": "Thai"}, [], "FindRestaurants",
         "{restaurant_name:Lers Ros} is a good choice.",
         [{"restaurant_name": "Lers Ros", "city": "Oakland", "cuisine": "Thai", "price_range": "inexpensive",
           "street_address": "730 Larkin Street", "phone_number": "510-555-0111"},
          {"restaurant_name": "Thai House", "city": "Oakland", "cuisine": "Thai", "price_range": "inexpensive",
           "street_address": "20 Broadway", "phone_number": "510-555-0112"}]),
        ("What's the address?", "Restaurants_1", {}, ["street_address"], "FindRestaurants",
         "It is at {street_address:730 Larkin Street}.", None)]),
    ("2_00001", "test", ["Restaurants_1"], [
        ("I want to eat Italian food in Palo Alto.", "Restaurants_1", {"city": "Palo Alto", "cuisine": "Italian"}, [],
         "FindRestaurants", "{restaurant_name:Terun} is a popular spot.",
         [{"restaurant_name": "Terun", "city": "Palo Alto", "cuisine": "Italian", "street_address": "448 California Avenue",
           "phone_number": "650-555-0140"},
          {"restaurant_name": "Il Fornaio", "city": "Palo Alto", "cuisine": "Italian", "street_address": "520 Cowper Street",
           "phone_number": "650-555-0141"},
          {"restaurant_name": "Osteria", "city": "Palo Alto", "cuisine": "Italian", "street_address": "247 Hamilton Avenue",
           "phone_number": "650-555-0142"},
          {"restaurant_name": "Pizzeria Delfina", "city": "Palo Alto", "cuisine": "Italian",
           "street_address": "651 Emerson Street", "phone_number": "650-555-0143"}]),
        ("What is the street address?", "Restaurants_1", {}, ["street_address"], "FindRestaurants",
         "The address is {street_address:448 California Avenue}.", None)]),
    ("2_00002", "test", ["Movies_1", "Restaurants_1"], [
        ("Any movies showing in Santa Rosa?", "Movies_1", {"location": "Santa Rosa"}, [], "FindMovies",
         "{movie_name:Dumbo} is showing at {theater_name:Airport Stadium 12}.",
         [{"movie_name": "Dumbo", "genre": "Family", "theater_name": "Airport Stadium 12", "location": "Santa Rosa"}]),
        ("Thanks. Now find me a Chinese restaurant in Santa Rosa.", "Restaurants_1",
         {"city": "Santa Rosa", "cuisine": "Chinese"}, [], "FindRestaurants",
         "{restaurant_name:Hang Ah} is a nice place.",
         [{"restaurant_name": "Hang Ah", "city": "Santa Rosa", "cuisine": "Chinese", "phone_number": "707-555-0199",
           "street_address": "3 Fourth Street"}]),
        ("What is its phone number?", "Restaurants_1", {}, ["phone_number"], "FindRestaurants",
         "It's {phone_number:707-555-0199}.", None)]),
]


def sgd_dialogue(did, services, turns):
    out, states = [], {}
    for i, (user, service, pairs, requested, intent, system, results) in enumerate(turns):
        st = states.setdefault(service, {})
        for k, v in pairs.items():
            st[k] = [v]
        out.append({"frames": [{"actions": [], "service": service, "slots": [],
                                "state": {"active_intent": intent, "requested_slots": requested,
                                          "slot_values": dict(st)}}],
                    "speaker": "USER", "utterance": user})
        text, spans = expand(system)
        frame = {"actions": [], "service": service, "slots": spans}
        if results is not None:
            frame["service_call"] = {"method": intent, "parameters": {k: v[0] for k, v in st.items()}}
            frame["service_results"] = results
        out.append({"frames": [frame], "speaker": "SYSTEM", "utterance": text})
    return {"dialogue_id": did, "services": services, "turns": out}


def make_sgd():
    base = "data/sgd"
    splits = {"train": [], "test": []}
    for did, split, services, turns in SGD_DIALOGUES:
        splits[split].append(sgd_dialogue(did, services, turns))
    for split, dialogues in splits.items():
        used = {s for d in dialogues for s in d["services"]}
        write(f"{base}/{split}/schema.json", [s for s in SGD_SCHEMA if s["service_name"] in used])
        write(f"{base}/{split}/dialogues_001.json", dialogues)


if __name__ == "__main__":
    make_multiwoz()
    make_sgd()
