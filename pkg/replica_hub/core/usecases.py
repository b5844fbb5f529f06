# Модуль содержит бизнес-логику приложения FMKe поверх TCC-хранилища
import logging
from dataclasses import dataclass, field
from typing import Any, Callable

from replica_hub.core.exceptions import PrescriptionNotFoundError
from replica_hub.core.models import ObjectKey, Session
from replica_hub.core.store import Replica, Transaction
from replica_hub.core.sync import Sleep, SyncAgent, WaitUntil, run_protected
from replica_hub.decorators import format_log

logger = logging.getLogger(__name__)

DELIVERED, REJECTED = 'Delivered', 'Rejected'


@dataclass
class Client:
    """
    Клиент, выполняющий операции на реплике от имени сессии.

    Атрибуты:
        replica - реплика, к которой подключен клиент
        agent - агент синхронизации этой реплики
        session - сессия (переносит last_seen между транзакциями)
        owner - имя процесса (владелец токенов)
        observer - получает всё прочитанное одной транзакцией
    """
    replica: Replica
    agent: SyncAgent
    session: Session
    owner: str
    observer: Callable[[dict], Any] = field(default=lambda view: None)

    def begin(self):
        """ Ждёт, пока реплика догонит сессию, и открывает транзакцию """
        replica, session = self.replica, self.session
        yield WaitUntil(
            lambda: replica.covers(session.last_seen), 'session', session.name
        )
        return replica.begin(session, owner=self.owner)

    def observe(self, txn: Transaction, view: dict):
        self.observer({'replica': self.replica.id, 'txn': txn.label,
                       'view': view})


@dataclass(frozen=True)
class AppConfig:
    """ Режим process-prescription: cp (под токеном) или best-effort (AP) """
    process_mode: str = 'best-effort'

    def __post_init__(self):
        if self.process_mode not in ('cp', 'best-effort'):
            raise ValueError(
                f"Неизвестный режим обработки рецептов '{self.process_mode}'."
            )


class PrescriptionKeying:
    """
    Детерминированное отображение сущностей FMKe на ключи хранилища.

    prescriptions/<id> - запись рецепта: id, patient, doctor, pharmacy,
                         medications (словарь счетчиков)
    patients/<id>, staff/<id>, pharmacies/<id> - записи с копиями рецептов:
                         prescriptions -> <id> -> {id, medications}
    """
    PRESCRIPTIONS = 'prescriptions'
    PATIENTS = 'patients'
    STAFF = 'staff'
    PHARMACIES = 'pharmacies'
    HOLDERS = (PATIENTS, STAFF, PHARMACIES)

    @classmethod
    def prescription(cls, prescription_id: str) -> ObjectKey:
        return ObjectKey(cls.PRESCRIPTIONS, prescription_id, 'map')

    @classmethod
    def patient(cls, patient_id: str) -> ObjectKey:
        return ObjectKey(cls.PATIENTS, patient_id, 'map')

    @classmethod
    def staff(cls, staff_id: str) -> ObjectKey:
        return ObjectKey(cls.STAFF, staff_id, 'map')

    @classmethod
    def pharmacy(cls, pharmacy_id: str) -> ObjectKey:
        return ObjectKey(cls.PHARMACIES, pharmacy_id, 'map')

    @classmethod
    def copies(cls, record: dict) -> list[ObjectKey]:
        """ Ключи записей, в которых хранится копия рецепта """
        return [
            cls.patient(record['patient']),
            cls.staff(record['doctor']),
            cls.pharmacy(record['pharmacy']),
        ]


def medication_op(med: str, delta: int):
    return ('update', 'medications', 'map',
            ('update', med, 'counter', ('add', delta)))


def copy_op(prescription_id: str, nested):
    return ('update', 'prescriptions', 'map',
            ('update', prescription_id, 'map', nested))


def _require(value, name: str):
    if not isinstance(value, str) or not value.strip():
        raise ValueError(f"Параметр '{name}' не должен быть пустым.")
    return value


class FmkeCommands:
    """
    Класс операций FMKe

    Команды:
        create_prescription - создание рецепта и связывание копий
        update_prescription_medication - добавление лекарства / увеличение count
        process_prescription - выдача лекарства аптекой
        get_staff_prescriptions, get_pharmacy_prescriptions - чтение индексов

    Все команды - генераторы для симулятора.
    """
    def __init__(self, config: AppConfig | None = None):
        self.config = config or AppConfig()

    def create_prescription(
            self,
            client: Client,
            prescription_id: str,
            patient_id: str,
            doctor_id: str,
            pharmacy_id: str,
            meds: dict
    ):
        """
        Одна транзакция: сначала инициализирует запись рецепта,
        затем связывает её с пациентом, врачом и аптекой.

        Возвращает:
            Часы фиксации.
        """
        for value, name in ((prescription_id, 'prescription'),
                            (patient_id, 'patient'), (doctor_id, 'doctor'),
                            (pharmacy_id, 'pharmacy')):
            _require(value, name)
        for med, count in meds.items():
            if not isinstance(count, int) or count <= 0:
                raise ValueError(
                    f"Количество '{med}' должно быть положительным целым."
                )

        txn = yield from client.begin()
        record_key = PrescriptionKeying.prescription(prescription_id)
        txn.update(record_key, ('update', 'id', 'register',
                                ('assign', prescription_id)))
        for name, value in (('patient', patient_id), ('doctor', doctor_id),
                            ('pharmacy', pharmacy_id)):
            txn.update(record_key, ('update', name, 'register',
                                    ('assign', value)))
        for med, count in sorted(meds.items()):
            txn.update(record_key, medication_op(med, count))

        holders = (
            PrescriptionKeying.patient(patient_id),
            PrescriptionKeying.staff(doctor_id),
            PrescriptionKeying.pharmacy(pharmacy_id),
        )
        for holder in holders:
            txn.update(holder, ('update', 'id', 'register',
                                ('assign', holder.key)))
            txn.update(holder, copy_op(prescription_id, (
                'update', 'id', 'register', ('assign', prescription_id)
            )))
            for med, count in sorted(meds.items()):
                txn.update(holder, copy_op(prescription_id,
                                           medication_op(med, count)))
        clock = txn.commit()
        logger.info(format_log('CREATE', client.replica.id, txn.label,
                               str(record_key)))
        return clock

    def update_prescription_medication(
            self,
            client: Client,
            prescription_id: str,
            med: str,
            delta: int
    ):
        """
        Увеличивает count лекарства (создаёт, если нет) во всех копиях.

        Выбрасывает:
            PrescriptionNotFoundError - рецепт не виден в снимке
        """
        _require(med, 'med')
        if not isinstance(delta, int) or delta <= 0:
            raise ValueError('Приращение должно быть положительным целым.')

        txn = yield from client.begin()
        record_key = PrescriptionKeying.prescription(prescription_id)
        record = txn.read(record_key)
        client.observe(txn, {record_key: record})
        if 'id' not in record:
            txn.abort()
            raise PrescriptionNotFoundError(prescription_id)
        txn.update(record_key, medication_op(med, delta))
        for holder in PrescriptionKeying.copies(record):
            txn.update(holder, copy_op(prescription_id,
                                       medication_op(med, delta)))
        clock = txn.commit()
        logger.info(format_log('UPDATE_MEDICATION', client.replica.id,
                               txn.label, str(record_key), delta))
        return clock

    def process_prescription(
            self,
            client: Client,
            prescription_id: str,
            med: str,
            n: int = 1,
            mode: str | None = None
    ):
        """
        Выдача лекарства: если count >= n, уменьшает count во всех копиях.
        В режиме cp проверка и декремент выполняются под токеном рецепта.

        Возвращает:
            'Delivered' | 'Rejected'
        """
        if not isinstance(n, int) or n <= 0:
            raise ValueError('Количество выдачи должно быть положительным.')
        mode = mode or self.config.process_mode
        record_key = PrescriptionKeying.prescription(prescription_id)

        def body(txn):
            record = txn.read(record_key)
            client.observe(txn, {record_key: record})
            count = record.get('medications', {}).get(med, 0)
            if 'id' not in record or count < n:
                return REJECTED
            txn.update(record_key, medication_op(med, -n))
            for holder in PrescriptionKeying.copies(record):
                txn.update(holder, copy_op(prescription_id,
                                           medication_op(med, -n)))
            return DELIVERED

        if mode == 'cp':
            outcome, _ = yield from run_protected(
                client.agent, client.session, [record_key], body, client.owner
            )
        else:
            txn = yield from client.begin()
            outcome = body(txn)
            txn.commit()

        logger.info(format_log(
            'PROCESS', client.replica.id, None, str(record_key), n,
            verbose={'mode': mode, 'outcome': outcome}
        ))
        return outcome

    def get_staff_prescriptions(self, client: Client, staff_id: str):
        """ Рецепты врача (read-only транзакция по индексу записи) """
        return (yield from self._list_prescriptions(
            client, PrescriptionKeying.staff(staff_id)
        ))

    def get_pharmacy_prescriptions(self, client: Client, pharmacy_id: str):
        """ Рецепты аптеки (read-only транзакция по индексу записи) """
        return (yield from self._list_prescriptions(
            client, PrescriptionKeying.pharmacy(pharmacy_id)
        ))

    def read_prescription_copies(
            self,
            client: Client,
            prescription_id: str,
            patient_id: str,
            pharmacy_id: str,
            think: int = 0
    ):
        """
        Читает копию рецепта у пациента, ждёт think тактов и читает
        копию в аптеке - в одной транзакции.
        """
        txn = yield from client.begin()
        patient_key = PrescriptionKeying.patient(patient_id)
        pharmacy_key = PrescriptionKeying.pharmacy(pharmacy_id)
        patient = txn.read(patient_key)
        if think:
            yield Sleep(think)
        pharmacy = txn.read(pharmacy_key)
        txn.commit()
        client.observe(txn, {patient_key: patient, pharmacy_key: pharmacy})
        return {
            'patient': _copy_of(patient, prescription_id),
            'pharmacy': _copy_of(pharmacy, prescription_id),
        }

    def _list_prescriptions(self, client: Client, holder_key: ObjectKey):
        txn = yield from client.begin()
        holder = txn.read(holder_key)
        view = {holder_key: holder}
        listed = []
        for prescription_id in sorted(holder.get('prescriptions', {})):
            record_key = PrescriptionKeying.prescription(prescription_id)
            view[record_key] = txn.read(record_key)
            listed.append(prescription_id)
        txn.commit()
        client.observe(txn, view)
        return listed


def _copy_of(record: dict, prescription_id: str):
    copy = record.get('prescriptions', {}).get(prescription_id)
    if copy is None:
        return None
    return copy.get('medications', {})
